import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twostrain import (
    DomainError,
    EpiParams,
    ModelKind,
    ModelSpec,
    StateVec,
    StructuralError,
    epsilon_to_lambda,
    eval_rhs,
    lambda_to_epsilon,
    make_model,
)
from twostrain.model_core import rhs_function


@st.composite
def models(draw, max_k=8):
    kind = draw(st.sampled_from(list(ModelKind)))
    if kind.is_basic:
        return ModelSpec(kind)
    k = draw(st.integers(1, max_k))
    return ModelSpec(kind, k, draw(st.integers(0, k)))


rates = st.floats(0.01, 2.0)


@st.composite
def model_params_state(draw):
    model = draw(models())
    params = EpiParams(draw(rates), draw(rates), draw(rates), draw(rates), draw(st.floats(0, 2)), 1000.0)
    w = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=model.n_states, max_size=model.n_states)))
    w = w + 1e-3
    y = params.N * w / w.sum()
    return model, params, StateVec.from_array(model, y)


def test_kind_parse_accepts_common_spellings():
    assert ModelKind.parse("integrated-basic") is ModelKind.INTEGRATED_BASIC
    assert ModelKind.parse("SEPARATED_CHAIN") is ModelKind.SEPARATED_CHAIN
    assert ModelKind.parse("integratedchain") is ModelKind.INTEGRATED_CHAIN
    with pytest.raises(DomainError):
        ModelKind.parse("sirs")


def test_kind_flags():
    assert ModelKind.INTEGRATED_BASIC.is_basic and ModelKind.INTEGRATED_BASIC.is_integrated
    assert ModelKind.SEPARATED_CHAIN.is_separated and not ModelKind.SEPARATED_CHAIN.is_basic


@pytest.mark.parametrize("kind,k,r", [
    ("integrated-basic", 2, 1),
    ("separated-basic", 1, 0),
    ("integrated-chain", 0, 0),
    ("integrated-chain", 3, 4),
    ("separated-chain", 3, -1),
])
def test_model_spec_rejects_bad_structure(kind, k, r):
    with pytest.raises(DomainError):
        ModelSpec(kind, k, r)


def test_model_spec_real_r():
    assert isinstance(ModelSpec("integrated-chain", 5, 3.0).r, int)
    spec = ModelSpec("integrated-chain", 5, 2.5)
    assert spec.r == 2.5 and not spec.integer_r
    with pytest.raises(DomainError):
        spec.require_integer_r()


def test_make_model():
    assert make_model("integrated-basic") == ModelSpec(ModelKind.INTEGRATED_BASIC, 1, 1)
    with pytest.raises(DomainError):
        make_model("separated-basic", k=3)
    with pytest.raises(DomainError):
        make_model("integrated-chain", 5)
    with pytest.raises(DomainError):
        make_model("integrated-chain", 5, 2.5)
    with pytest.raises(DomainError):
        make_model("separated-chain", 3, 4)


def test_layout():
    spec = make_model("separated-chain", 3, 1)
    assert spec.labels() == ["S0", "S1", "S2", "S3", "I1", "I2", "V"]
    assert spec.n_states == 7
    assert make_model("integrated-basic").n_states == 4


@pytest.mark.parametrize("field,value", [
    ("beta1", -0.1), ("gamma", 0.0), ("alpha", -1.0), ("lam", -0.01), ("N", 0.0), ("beta2", math.nan),
])
def test_params_validation(field, value):
    base = dict(beta1=0.6, beta2=0.2, gamma=0.1, alpha=0.1, lam=0.0, N=1000.0)
    base[field] = value
    with pytest.raises(DomainError):
        EpiParams(**base)


def test_epsilon_to_lambda_basic():
    # lambda = eps alpha / (1 - eps)
    spec = make_model("integrated-basic")
    assert epsilon_to_lambda(spec, 0.5, 0.1) == pytest.approx(0.1, rel=1e-15)
    assert epsilon_to_lambda(make_model("separated-basic"), 0.75, 0.1) == pytest.approx(0.3, rel=1e-15)


def test_epsilon_to_lambda_integrated_chain():
    # lambda = eps alpha k / ((1 - eps)(k - r)); k=5, r=3, eps=0.2 -> 0.0625
    spec = make_model("integrated-chain", 5, 3)
    assert epsilon_to_lambda(spec, 0.2, 0.1) == pytest.approx(0.0625, rel=1e-15)


def test_epsilon_map_domain():
    spec = make_model("integrated-basic")
    for bad in (-0.1, 1.0, math.inf):
        with pytest.raises(DomainError):
            epsilon_to_lambda(spec, bad, 0.1)
    degenerate = make_model("integrated-chain", 4, 4)
    assert epsilon_to_lambda(degenerate, 0.0, 0.1) == 0.0
    with pytest.raises(DomainError):
        epsilon_to_lambda(degenerate, 0.3, 0.1)


@given(models(), st.floats(0.0, 0.999), st.floats(0.001, 2.0))
def test_epsilon_lambda_round_trip(model, eps, alpha):
    if model.kind is ModelKind.INTEGRATED_CHAIN and model.r == model.k:
        return
    lam = epsilon_to_lambda(model, eps, alpha)
    assert lambda_to_epsilon(model, lam, alpha) == pytest.approx(eps, rel=1e-12, abs=1e-15)


def test_state_vec_round_trip_and_errors():
    spec = make_model("separated-chain", 2, 1)
    y = np.arange(1.0, 7.0)
    state = StateVec.from_array(spec, y)
    np.testing.assert_array_equal(state.to_array(), y)
    assert state.total() == 21.0
    assert state.as_dict()["V"] == 6.0
    with pytest.raises(StructuralError):
        StateVec.from_array(spec, y[:-1])
    with pytest.raises(StructuralError):
        StateVec((1.0, 2.0, 3.0), 1.0, 1.0).check_layout(spec)


def test_eval_rhs_rejects_mismatched_state():
    spec = make_model("integrated-chain", 3, 1)
    params = EpiParams(0.6, 0.2, 0.1, 0.1)
    with pytest.raises(StructuralError):
        eval_rhs(spec, params, StateVec((900.0, 50.0), 30.0, 20.0))


def test_rhs_integrated_basic_hand_values():
    # S' = aR - b1 S I1/N - b2 S I2/N - lam S, R' = g(I1+I2) + lam S - aR - b2 R I2/N,
    # I1' = b1 S I1/N - g I1, I2' = b2 (S+R) I2/N - g I2
    params = EpiParams(0.6, 0.2, 0.1, 0.1, lam=0.05)
    d = eval_rhs(make_model("integrated-basic"), params, StateVec((900.0, 50.0), 30.0, 20.0))
    np.testing.assert_allclose(d.to_array(), [-59.8, 44.8, 13.2, 1.8], rtol=0, atol=1e-12)


def test_rhs_separated_basic_hand_values():
    # S' = aR + aV - b1 S I1/N - b2 S I2/N - lam S, R' = g(I1+I2) - b2 R I2/N - (lam + a)R,
    # V' = lam (S + R) - aV
    params = EpiParams(0.6, 0.2, 0.1, 0.1, lam=0.05)
    d = eval_rhs(make_model("separated-basic"), params, StateVec((850.0, 50.0), 30.0, 20.0, 50.0))
    np.testing.assert_allclose(d.to_array(), [-51.2, -2.7, 12.3, 1.6, 40.0], rtol=0, atol=1e-12)


def test_rhs_integrated_chain_hand_values():
    # k=3, r=1: vaccination from S0, S1 to S3; S1 exposed to Strain 2
    params = EpiParams(0.6, 0.2, 0.1, 0.1, lam=0.05)
    state = StateVec((500.0, 100.0, 150.0, 200.0), 30.0, 20.0)
    d = eval_rhs(make_model("integrated-chain", 3, 1), params, state)
    np.testing.assert_allclose(d.to_array(), [-6.0, 9.6, 15.0, -25.0, 6.0, 0.4], rtol=0, atol=1e-12)


def test_rhs_separated_chain_vaccinated_skip_chain():
    # no infection: V fills from S0..Sr at lam and drains to S0 at alpha
    params = EpiParams(0.6, 0.2, 0.1, 0.1, lam=0.05)
    state = StateVec((400.0, 200.0, 100.0), 0.0, 0.0, 300.0)
    d = eval_rhs(make_model("separated-chain", 2, 1), params, state).to_array()
    ka = 0.2
    expected = [ka * 200 - 0.05 * 400 + 0.1 * 300, ka * 100 - ka * 200 - 0.05 * 200, -ka * 100, 0, 0,
                0.05 * 600 - 0.1 * 300]
    np.testing.assert_allclose(d, expected, rtol=0, atol=1e-12)


@settings(max_examples=200)
@given(model_params_state())
def test_rhs_conserves_population(case):
    model, params, state = case
    d = eval_rhs(model, params, state).to_array()
    assert abs(math.fsum(d)) <= 1e-12 * params.N


def test_rhs_function_matches_eval_rhs():
    spec = make_model("separated-chain", 4, 2)
    params = EpiParams(0.5, 0.3, 0.1, 0.05, lam=0.02)
    y = np.array([300.0, 100, 90, 80, 70, 40, 20, 300])
    f = rhs_function(spec, params)
    np.testing.assert_array_equal(f(0.0, y), eval_rhs(spec, params, StateVec.from_array(spec, y)).to_array())
