import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfsim.exceptions import ConfigurationError, UnknownModeError
from dfsim.fock import FockStateVector, apply_transform, make_registry, project_occupation, propagate_coherent
from dfsim.optics import (
    JONES,
    ElementKind,
    ElementSpec,
    OverlapModel,
    analyzer,
    build_path,
    glass_plate,
    hwp,
    jones_waveplate,
    loss_channel,
    overlap_split,
    pbs,
    phase_shifter,
    polarizer_projection,
    route,
)


def _photon(registry, spatial, polarization, temporal="matched", cutoff=4) -> FockStateVector:
    return FockStateVector.basis(registry, {registry.index(spatial, polarization, temporal): 1}, cutoff)


def _probability(state, spatial, polarization, temporal="matched") -> float:
    return project_occupation(state, state.registry.index(spatial, polarization, temporal), 1).norm_squared()


# ВОЛНОВЫЕ ПЛАСТИНКИ

def test_hwp_at_45_degrees_swaps_h_and_v():
    w = jones_waveplate(math.pi / 4, math.pi)
    assert np.allclose(np.abs(w @ JONES["H"]), np.abs(JONES["V"]))
    assert np.allclose(np.abs(w @ JONES["V"]), np.abs(JONES["H"]))


def test_hwp_at_22_5_degrees_maps_h_to_diagonal():
    w = jones_waveplate(math.pi / 8, math.pi)
    assert abs(np.vdot(JONES["D"], w @ JONES["H"])) == pytest.approx(1.0)


@pytest.mark.parametrize(("basis", "plus", "minus"), [("Z", "H", "V"), ("X", "D", "A"), ("Y", "R", "L")])
def test_analyzer_routes_eigenstates(basis, plus, minus):
    """После анализатора "+" состояние базиса оказывается в H-моде, "-" -- в V-моде."""
    reg = make_registry(["E"])
    t = analyzer(reg, "E", basis)
    for polarization, expected in ((plus, "H"), (minus, "V")):
        jones = JONES[polarization]
        out = jones if t is None else t.matrix @ jones
        index = 0 if expected == "H" else 1
        assert abs(out[index]) == pytest.approx(1.0)


def test_waveplate_acts_on_both_temporal_components():
    reg = make_registry([("R", True)])
    out = apply_transform(_photon(reg, "R", "H", "orthogonal"), hwp(reg, "R", math.pi / 4))
    assert _probability(out, "R", "V", "orthogonal") == pytest.approx(1.0)


def test_phase_shifter_keeps_populations():
    reg = make_registry(["B"])
    superposition = apply_transform(_photon(reg, "B", "H"), hwp(reg, "B", math.pi / 8))
    shifted = apply_transform(superposition, phase_shifter(reg, "B", 0.0, 0.7))
    assert _probability(shifted, "B", "V") == pytest.approx(_probability(superposition, "B", "V"))
    assert shifted.amplitude((0, 1)) == pytest.approx(superposition.amplitude((0, 1)) * np.exp(0.7j))


@settings(max_examples=30, deadline=None)
@given(angle=st.floats(-math.pi, math.pi))
def test_double_half_wave_plate_is_identity(angle):
    """Две одинаковые HWP подряд -- единичная матрица с точностью до глобальной фазы."""
    reg = make_registry(["E"])
    plate = hwp(reg, "E", angle)
    m = plate.after(plate).matrix
    assert abs(m[0, 0]) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(m / m[0, 0], np.eye(2), atol=1e-12)


# КОМПОЗИЦИЯ ЭЛЕМЕНТОВ

def test_route_then_waveplate_composes():
    """A -> E, затем HWP на E: композиция совпадает с последовательным применением."""
    reg = make_registry(["A", "E"])
    first, second = route(reg, "A", "E"), hwp(reg, "E", math.pi / 8)
    composed = second.after(first)
    assert set(composed.inputs) == {reg.index("A", "H"), reg.index("A", "V")}

    photon = _photon(reg, "A", "H")
    sequential = apply_transform(apply_transform(photon, first), second)
    assert apply_transform(photon, composed).isclose(sequential, atol=1e-12)
    assert _probability(sequential, "E", "H") == pytest.approx(0.5)
    assert _probability(sequential, "E", "V") == pytest.approx(0.5)


def test_loss_then_waveplate_composes():
    reg = make_registry(["B", "LB"])
    first, second = loss_channel(reg, "B", 0.3, "LB"), hwp(reg, "B", math.pi / 4)
    photon = _photon(reg, "B", "H")
    sequential = apply_transform(apply_transform(photon, first), second)
    assert apply_transform(photon, second.after(first)).isclose(sequential, atol=1e-12)
    assert _probability(sequential, "B", "V") == pytest.approx(0.3)


# ПОЛЯРИЗАЦИОННЫЙ СВЕТОДЕЛИТЕЛЬ

@pytest.mark.parametrize(("source", "pol", "target"), [
    ("A", "H", "E"), ("A", "V", "F"), ("R", "H", "F"), ("R", "V", "E"),
])
def test_pbs_routing(source, pol, target):
    reg = make_registry(["A", "R", "E", "F"])
    out = apply_transform(_photon(reg, source, pol), pbs(reg, "A", "R", "E", "F"))
    assert _probability(out, target, pol) == pytest.approx(1.0)


def test_pbs_parity_check_on_hh_and_hv():
    """HH на входах даёт по фотону в E и F; HV -- оба фотона в одном выходе."""
    reg = make_registry(["A", "R", "E", "F"])
    t = pbs(reg, "A", "R", "E", "F")

    hh = FockStateVector.basis(reg, {reg.index("A", "H"): 1, reg.index("R", "H"): 1})
    out = apply_transform(hh, t)
    assert out.amplitude(_occ(reg, ("E", "H"), ("F", "H"))) == pytest.approx(1.0)

    hv = FockStateVector.basis(reg, {reg.index("A", "H"): 1, reg.index("R", "V"): 1})
    out = apply_transform(hv, t)
    assert abs(out.amplitude(_occ(reg, ("E", "H"), ("E", "V")))) == pytest.approx(1.0)


def _occ(reg, *modes) -> tuple[int, ...]:
    occ = [0] * len(reg)
    for spatial, pol in modes:
        occ[reg.index(spatial, pol)] += 1
    return tuple(occ)


def test_pbs_rejects_repeated_ports():
    reg = make_registry(["A", "E"])
    with pytest.raises(ConfigurationError):
        pbs(reg, "A", "A", "E", "E")


# ПОТЕРИ, ПЛАСТИНКА, ПОЛЯРИЗАТОР

def test_loss_requires_registered_loss_label():
    reg = make_registry(["A"])
    with pytest.raises(UnknownModeError):
        loss_channel(reg, "A", 0.5, "L")


def test_loss_rejects_transmittance_outside_unit_interval():
    reg = make_registry(["A", "L"])
    with pytest.raises(ConfigurationError):
        loss_channel(reg, "A", 1.5, "L")


def test_glass_plate_splits_by_reflectance():
    reg = make_registry(["B", "G", "X"])
    plate = glass_plate(reg, "B", None, 0.05, transmit_out="G", reflect_out="X", transmit_discard="X")
    out = apply_transform(_photon(reg, "B", "V"), plate)
    assert _probability(out, "G", "V") == pytest.approx(0.95)
    assert _probability(out, "X", "V") == pytest.approx(0.05)


def test_glass_plate_needs_discard_for_partial_port():
    reg = make_registry(["B", "G"])
    with pytest.raises(ConfigurationError):
        glass_plate(reg, "B", None, 0.05, transmit_out="G", reflect_out="G")


def test_polarizer_projection_on_diagonal():
    """Фотон H проходит поляризатор D с вероятностью 1/2, остальное -- в reject."""
    reg = make_registry(["F", "FR"])
    out = apply_transform(_photon(reg, "F", "H"), polarizer_projection(reg, "F", "D", "FR"))
    assert _probability(out, "F", "H") == pytest.approx(0.5)
    assert _probability(out, "FR", "H") == pytest.approx(0.5)

    diagonal = apply_transform(_photon(reg, "F", "H"), hwp(reg, "F", math.pi / 8))
    out = apply_transform(diagonal, polarizer_projection(reg, "F", "D", "FR"))
    assert _probability(out, "F", "H") == pytest.approx(1.0)


# ПЕРЕКРЫТИЕ ИМПУЛЬСОВ

def test_overlap_split_moves_weight_to_orthogonal_twin():
    reg = make_registry([("R", True)])
    out = apply_transform(_photon(reg, "R", "H"), overlap_split(reg, "R", 0.6))
    assert _probability(out, "R", "H") == pytest.approx(0.36)
    assert _probability(out, "R", "H", "orthogonal") == pytest.approx(0.64)


@pytest.mark.parametrize("overlap", [0.0, 0.3, 0.9409, 1.0])
def test_overlap_split_keeps_mean_photon_number(overlap):
    """Импульс R с поляризацией D: среднее число фотонов не меняется при любом s."""
    reg = make_registry([("R", True)])
    alpha = math.sqrt(0.1077 / 2)
    amplitudes = {reg.index("R", "H"): alpha, reg.index("R", "V"): alpha}
    out = propagate_coherent(amplitudes, overlap_split(reg, "R", overlap))
    assert sum(abs(a) ** 2 for a in out.values()) == pytest.approx(0.1077, abs=1e-12)
    assert abs(out.get(reg.index("R", "H"), 0j)) ** 2 == pytest.approx(overlap ** 2 * 0.1077 / 2, abs=1e-12)


def test_overlap_split_requires_twins():
    reg = make_registry(["R"])
    with pytest.raises(ConfigurationError):
        overlap_split(reg, "R", 0.5)


def test_overlap_model_gaussian():
    model = OverlapModel(s0=0.9, sigma_um=100.0)
    assert model.at(0.0) == pytest.approx(0.9)
    assert model.at(100.0) == pytest.approx(0.9 * math.exp(-0.5))
    assert model.at(1e4) == pytest.approx(0.0, abs=1e-12)


def test_overlap_model_rejects_nonpositive_sigma():
    with pytest.raises(ConfigurationError):
        OverlapModel(0.9, 0.0)


# ОПИСАНИЯ ЭЛЕМЕНТОВ

def test_build_path_from_element_specs():
    reg = make_registry(["B", "LB"])
    path = build_path(reg, [
        ElementSpec(ElementKind.PHASE_SHIFTER, ("B",), phase_v=math.pi),
        ElementSpec(ElementKind.LOSS, ("B", "LB"), transmittance=0.25),
    ])
    out = _photon(reg, "B", "V")
    for t in path:
        out = apply_transform(out, t)
    assert _probability(out, "B", "V") == pytest.approx(0.25)
    assert out.amplitude(_occ(reg, ("B", "V"))) == pytest.approx(-0.5)


def test_element_spec_validates_parameters():
    with pytest.raises(ConfigurationError):
        ElementSpec(ElementKind.LOSS, ("B", "LB"), transmittance=-0.1)
    with pytest.raises(ConfigurationError):
        ElementSpec(ElementKind.HWP, ("B",), angle=math.inf)
    with pytest.raises(ValueError):
        ElementSpec("mirror", ("B",))
