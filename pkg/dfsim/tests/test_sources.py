import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfsim.exceptions import ConfigurationError, EmptyPostSelectionError
from dfsim.fock import FockStateVector, fidelity_to_phi_plus, make_registry
from dfsim.sources import (
    CoherentParams,
    CoincidenceTable,
    DetectorModel,
    Herald,
    SpdcParams,
    click_probabilities,
    coherent_amplitudes,
    coherent_state,
    coincidence_table,
    conditioned_polarization_dm,
    encoded_pair_state,
    number_state,
    photon_count_distribution,
    poisson_weights,
    spdc_state,
)


# ИСТОЧНИК ПАР

def test_spdc_single_pair_amplitudes(ab_registry):
    """Сектор одной пары: (|HH> + |VV>) с амплитудой sqrt(gamma) относительно вакуума."""
    state = spdc_state(SpdcParams(0.01, pair_cutoff=1), ab_registry, "A", "B", cutoff=4)
    vacuum = state.amplitude((0, 0, 0, 0))
    hh = state.amplitude((1, 0, 1, 0))
    vv = state.amplitude((0, 1, 0, 1))
    assert hh == pytest.approx(vv)
    assert abs(hh / vacuum) == pytest.approx(0.1)
    assert state.norm_squared() == pytest.approx(1.0)


def test_spdc_pair_statistics(ab_registry):
    p = SpdcParams(0.02, pair_cutoff=2)
    state = spdc_state(p, ab_registry, "A", "B", cutoff=4)
    a_modes = ab_registry.indices("A")
    counts = photon_count_distribution(state, [a_modes])
    for k in range(3):
        assert counts[(k,)] == pytest.approx(p.pair_probability(k))


def test_spdc_truncation_is_reported(ab_registry, caplog, monkeypatch):
    # Логгер dfsim не передаёт записи в root, а caplog слушает root
    monkeypatch.setattr(logging.getLogger("dfsim"), "propagate", True)
    state = spdc_state(SpdcParams(0.1, pair_cutoff=1), ab_registry, "A", "B", cutoff=4)
    # Полная норма ряда (1 - gamma)^-2, усечённая 1 + 2 gamma
    assert state.truncated_weight == pytest.approx(1 - (1 + 0.2) * 0.81)
    assert [r.levelno for r in caplog.records if "SPDC truncation" in r.getMessage()] == [logging.WARNING]


def test_reference_cutoff_truncation_is_debug_only(ab_registry, caplog, monkeypatch):
    monkeypatch.setattr(logging.getLogger("dfsim"), "propagate", True)
    with caplog.at_level(logging.DEBUG, logger="dfsim"):
        state = spdc_state(SpdcParams(0.1, pair_cutoff=1, reference_cutoff=True), ab_registry, "A", "B", cutoff=4)
    assert state.truncated_weight > 0
    levels = [r.levelno for r in caplog.records if "SPDC truncation" in r.getMessage()]
    assert levels == [logging.DEBUG]


def test_spdc_rejects_large_gamma():
    with pytest.raises(ConfigurationError):
        SpdcParams(0.6)


def test_encoded_pair_carries_qubit(ab_registry):
    alpha, beta = 0.6, 0.8j
    state = encoded_pair_state(ab_registry, "A", "B", alpha, beta, 0.1, cutoff=4)
    assert state.amplitude((1, 0, 1, 0)) == pytest.approx(math.sqrt(0.1) * alpha)
    assert state.amplitude((0, 1, 0, 1)) == pytest.approx(math.sqrt(0.1) * beta)
    with pytest.raises(ConfigurationError):
        encoded_pair_state(ab_registry, "A", "B", 1.0, 1.0, 0.1, cutoff=4)


# КОГЕРЕНТНЫЙ ИМПУЛЬС

def test_coherent_params_bob_intensity():
    params = CoherentParams.from_bob(mu_b=2.0, transmittance=0.05)
    assert params.mu == pytest.approx(0.1)
    assert params.mu_b == pytest.approx(2.0)
    assert CoherentParams(0.1, 0.0).mu_b == math.inf


def test_coherent_state_is_diagonal_poisson():
    reg = make_registry(["R"])
    state = coherent_state(CoherentParams(0.3, 1.0, "H"), reg, "R", cutoff=6)
    counts = photon_count_distribution(state, [reg.indices("R")])
    expected = poisson_weights(0.3, 6)
    for n in range(7):
        assert counts[(n,)] == pytest.approx(expected[n])


def test_number_state_along_diagonal():
    reg = make_registry(["R"])
    state = number_state(reg, coherent_amplitudes(reg, "R", 1.0, "D"), 2, cutoff=4)
    # |2>_D = (|2,0> + sqrt(2)|1,1> + |0,2>) / 2
    assert state.amplitude((2, 0)) == pytest.approx(0.5)
    assert state.amplitude((1, 1)) == pytest.approx(math.sqrt(2) / 2)
    assert state.amplitude((0, 2)) == pytest.approx(0.5)


# ДЕТЕКТОРЫ

def test_threshold_detector_povm():
    d = DetectorModel("D", efficiency=0.13, dark_count=1.5e-6)
    assert d.click(0) == pytest.approx(1.5e-6)
    assert d.click(1) == pytest.approx(1 - (1 - 1.5e-6) * 0.87)
    assert d.no_click(2) == pytest.approx((1 - 1.5e-6) * 0.87 ** 2)


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(0, 1), dark=st.floats(0, 0.5), n=st.integers(0, 6))
def test_detector_povm_is_complete(eta, dark, n):
    d = DetectorModel("D", eta, dark)
    assert d.click(n) + d.no_click(n) == pytest.approx(1.0)
    assert 0.0 <= d.click(n) <= 1.0


def test_detector_rejects_bad_parameters():
    with pytest.raises(ConfigurationError):
        DetectorModel("D", efficiency=1.2)
    with pytest.raises(ConfigurationError):
        DetectorModel("D", dark_count=1.0)


def test_click_probabilities_sum_over_patterns():
    reg = make_registry(["E", "G"])
    state = FockStateVector.from_terms(reg, 4, {(1, 0, 1, 0): 0.6, (0, 0, 1, 0): 0.8})
    e, g = DetectorModel("E", 0.5, 0.01), DetectorModel("G", 0.7, 0.0)
    detectors = {e: reg.indices("E"), g: reg.indices("G")}
    total = sum(
        click_probabilities(state, detectors, {"E": ce, "G": cg})
        for ce in (True, False) for cg in (True, False)
    )
    assert total == pytest.approx(1.0)
    assert click_probabilities(state, detectors, {"G": True}) == pytest.approx(0.7)


def test_click_probabilities_reject_unknown_detector():
    reg = make_registry(["E"])
    state = FockStateVector.vacuum(reg)
    with pytest.raises(ConfigurationError):
        click_probabilities(state, {DetectorModel("E"): reg.indices("E")}, {"F": True})


# СОВПАДЕНИЯ И ТОМОГРАФИЯ

def _phi_plus_eg() -> FockStateVector:
    reg = make_registry(["E", "G"])
    return FockStateVector.from_terms(reg, 4, {(1, 0, 1, 0): 1 / math.sqrt(2), (0, 1, 0, 1): 1 / math.sqrt(2)})


def test_coincidence_table_for_phi_plus():
    ideal = DetectorModel("ideal")
    table = coincidence_table(_phi_plus_eg(), ideal, ideal, [], [(a, b) for a in "ZXY" for b in "ZXY"])

    assert table.correlator("Z", "Z") == pytest.approx(1.0)
    assert table.correlator("X", "X") == pytest.approx(1.0)
    assert table.correlator("Y", "Y") == pytest.approx(-1.0)
    assert table.correlator("Z", "X") == pytest.approx(0.0, abs=1e-12)
    assert table.triple == pytest.approx(1.0)
    assert fidelity_to_phi_plus(table.density_matrix()) == pytest.approx(1.0)


def test_coincidence_table_patterns_sum_to_one():
    d = DetectorModel("D", 0.4, 0.01)
    table = coincidence_table(_phi_plus_eg(), d, d, [], [("Z", "Z")])
    assert sum(table.patterns.values()) == pytest.approx(1.0)


def test_herald_gates_coincidences():
    """Условие на пустую метку F с идеальным детектором: совпадений нет."""
    reg = make_registry(["E", "F", "G"])
    state = FockStateVector.from_terms(reg, 4, {(1, 0, 0, 0, 1, 0): 1.0})
    ideal = DetectorModel("ideal")
    table = coincidence_table(state, ideal, ideal, [Herald(DetectorModel("D_F"), "F")], [("Z", "Z")])
    assert table.triple == 0.0
    with pytest.raises(EmptyPostSelectionError):
        table.correlator("Z", "Z")


def test_tomography_needs_all_bases():
    table = CoincidenceTable({("Z", "Z"): np.array([[0.5, 0], [0, 0.5]])})
    with pytest.raises(ConfigurationError):
        table.density_matrix()


def test_conditioned_dm_projects_f_on_diagonal():
    """Третий фотон в F в состоянии H: проекция на D даёт вероятность 1/2, пара остаётся |phi+>."""
    reg = make_registry(["E", "F", "FR", "G"])
    e_h, e_v = reg.index("E", "H"), reg.index("E", "V")
    g_h, g_v = reg.index("G", "H"), reg.index("G", "V")
    f_h = reg.index("F", "H")
    hh, vv = [0] * len(reg), [0] * len(reg)
    hh[e_h] = hh[g_h] = hh[f_h] = 1
    vv[e_v] = vv[g_v] = vv[f_h] = 1
    state = FockStateVector.from_terms(reg, 4, {tuple(hh): 1 / math.sqrt(2), tuple(vv): 1 / math.sqrt(2)})

    ideal = DetectorModel("ideal")
    dm, success = conditioned_polarization_dm(state, {"E": ideal, "F": ideal, "G": ideal})
    assert success == pytest.approx(0.5)
    assert fidelity_to_phi_plus(dm) == pytest.approx(1.0)
