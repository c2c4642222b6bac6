import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from twostrain import (
    DomainError,
    EpiParams,
    ErlangKernel,
    IntegrationOptions,
    erlang_chain_residual,
    erlang_pdf,
    integrate,
    lct_substitution_check,
    make_model,
    protocol_initial_state,
)
from twostrain.chain_delay import delay_means, erlang_pdf_derivative

TIGHT = IntegrationOptions(rel_tol=1e-10, abs_tol=1e-7, output_step=0.05)


def test_pdf_values():
    assert erlang_pdf(ErlangKernel(1, 2.0), 0.5) == pytest.approx(2 * math.exp(-1), rel=1e-15)
    # a^3 t^2 e^{-a t} / 2! at a=1, t=2
    assert erlang_pdf(ErlangKernel(3, 1.0), 2.0) == pytest.approx(2 * math.exp(-2), rel=1e-14)
    assert erlang_pdf(ErlangKernel(1, 3.0), 0.0) == 3.0
    assert erlang_pdf(ErlangKernel(2, 3.0), 0.0) == 0.0
    np.testing.assert_array_equal(erlang_pdf(ErlangKernel(2, 1.0), np.array([-1.0, -0.1])), 0.0)


@given(st.integers(1, 12), st.floats(0.05, 5.0), st.floats(0.0, 30.0))
def test_pdf_matches_gamma_distribution(shape, rate, t):
    ref = stats.gamma(a=shape, scale=1 / rate).pdf(t)
    assert erlang_pdf(ErlangKernel(shape, rate), t) == pytest.approx(ref, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("shape,rate", [(1, 0.5), (3, 0.5), (7, 2.0)])
def test_pdf_normalised_with_mean(shape, rate):
    kern = ErlangKernel(shape, rate)
    mass, _ = sp_integrate.quad(lambda t: erlang_pdf(kern, t), 0, np.inf)
    mean, _ = sp_integrate.quad(lambda t: t * erlang_pdf(kern, t), 0, np.inf)
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert mean == pytest.approx(kern.mean, rel=1e-8)


@pytest.mark.parametrize("shape", [1, 2, 3, 6])
def test_tail_matches_survival_function(shape):
    kern = ErlangKernel(shape, 0.7)
    for t in (0.0, 1.0, 5.0, 20.0):
        assert kern.tail(t) == pytest.approx(stats.gamma(a=shape, scale=1 / 0.7).sf(t), rel=1e-12)


@pytest.mark.parametrize("shape", [1, 2, 3, 5])
def test_derivative_matches_finite_difference(shape):
    kern = ErlangKernel(shape, 1.3)
    t = np.linspace(0.2, 10.0, 50)
    h = 1e-6
    fd = (erlang_pdf(kern, t + h) - erlang_pdf(kern, t - h)) / (2 * h)
    np.testing.assert_allclose(erlang_pdf_derivative(kern, t), fd, rtol=1e-6, atol=1e-9)


def test_derivative_at_origin():
    assert erlang_pdf_derivative(ErlangKernel(1, 2.0), 0.0) == -4.0
    assert erlang_pdf_derivative(ErlangKernel(2, 2.0), 0.0) == 4.0
    assert erlang_pdf_derivative(ErlangKernel(3, 2.0), 0.0) == 0.0


@pytest.mark.parametrize("k", range(1, 11))
@pytest.mark.parametrize("alpha", [0.04, 0.1, 1.0])
def test_chain_identity(k, alpha):
    assert erlang_chain_residual(k, alpha, np.linspace(1e-3, 200.0, 4001)) <= 1e-9


def test_kernel_and_grid_validation():
    for shape in (0, 2.5, True):
        with pytest.raises(DomainError):
            ErlangKernel(shape, 1.0)
    with pytest.raises(DomainError):
        ErlangKernel(2, 0.0)
    with pytest.raises(DomainError):
        erlang_chain_residual(3, 0.1, [0.0, 1.0])


def test_delay_means_split_waning_period():
    model = make_model("integrated-chain", 5, 3)
    mu1, mu2 = delay_means(model, EpiParams(0.4, 0.2, 0.1, 0.1))
    assert (mu1, mu2) == pytest.approx((4.0, 6.0))
    assert mu1 + mu2 == pytest.approx(1 / 0.1)


def _trajectory(model, params, t_end=400.0):
    return integrate(model, params, protocol_initial_state(model, params.N), t_end, TIGHT)


@pytest.mark.parametrize("kind,beta1", [("integrated-chain", 0.4), ("separated-chain", 0.28)])
@pytest.mark.parametrize("r", [0, 3, 5])
def test_substitution_check_passes(kind, beta1, r):
    model = make_model(kind, 5, r)
    params = EpiParams(beta1, 0.2, 0.1, 0.1, lam=0.05)
    report = lct_substitution_check(model, params, _trajectory(model, params), 400.0)
    assert report.passes(params.N)
    assert report.max_substitution_residual <= 1e-3 * params.N
    assert report.max_gamma_pi_residual <= 1e-3 * params.N
    assert len(report.per_index_residuals) == model.k


def test_substitution_residual_is_second_order(fig2_integrated):
    model, params = fig2_integrated
    params = params.with_epsilon(model, 0.2)
    traj = _trajectory(model, params)
    fine, mid, coarse = (lct_substitution_check(model, params, traj, 400.0, stride=s).max_substitution_residual
                         for s in (1, 2, 4))
    assert fine < mid < coarse
    assert math.log2(coarse / mid) >= 1.8 and math.log2(mid / fine) >= 1.8


def test_substitution_check_preconditions(fig2_integrated):
    model, params = fig2_integrated
    traj = _trajectory(model, params, 50.0)
    with pytest.raises(DomainError):
        lct_substitution_check(model, params, traj, 60.0)
    with pytest.raises(DomainError):
        lct_substitution_check(model, params, traj, 10.01)
    with pytest.raises(DomainError):
        lct_substitution_check(model, params, traj, 50.0, stride=3)
    basic = make_model("integrated-basic")
    with pytest.raises(DomainError):
        lct_substitution_check(basic, params, _trajectory(basic, params, 10.0), 10.0)
