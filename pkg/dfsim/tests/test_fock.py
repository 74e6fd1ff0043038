import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfsim.exceptions import ConfigurationError, EmptyPostSelectionError, TransformError, UnknownModeError
from dfsim.fock import (
    PHI_PLUS,
    FockStateVector,
    ModeTransform,
    PolarizationDensityMatrix,
    apply_transform,
    coherent_product,
    fidelity_to_phi_plus,
    make_registry,
    project_occupation,
    propagate_coherent,
    reduce_to_polarization_dm,
    tensor,
)
from dfsim.optics import loss_channel, rotation


def _splitter(theta: float = math.pi / 4) -> ModeTransform:
    """Делитель на H-модах меток a и b (индексы 0 и 2)."""
    return ModeTransform((0, 2), (0, 2), rotation(theta), label="BS")


def _random_state(registry, cutoff, seed, n_terms=6) -> FockStateVector:
    """Случайное нормированное состояние на первых трёх модах реестра."""
    rng = np.random.default_rng(seed)
    terms = {}
    for _ in range(n_terms):
        occ = [0] * len(registry)
        budget = int(rng.integers(0, cutoff + 1))
        for _ in range(budget):
            occ[int(rng.integers(0, 3))] += 1
        terms[tuple(occ)] = complex(rng.normal(), rng.normal())
    norm = math.sqrt(sum(abs(a) ** 2 for a in terms.values()))
    return FockStateVector.from_terms(registry, cutoff, {k: v / norm for k, v in terms.items()})


def _random_unitary(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# РЕЕСТР МОД

def test_registry_without_splitting_has_two_modes_per_label():
    reg = make_registry(["A", "B"])
    assert len(reg) == 4
    assert reg.labels == ("A", "B")


def test_registry_with_temporal_twins():
    reg = make_registry([("R", True)])
    assert len(reg) == 4
    assert reg.has_twins("R")
    assert reg.index("R", "V", "orthogonal") == 3


def test_empty_registry_is_valid():
    assert len(make_registry([])) == 0


def test_duplicate_label_is_rejected():
    with pytest.raises(ConfigurationError):
        make_registry(["A", ("A", True)])


def test_unknown_mode_lookup_raises():
    reg = make_registry(["A"])
    with pytest.raises(UnknownModeError):
        reg.index("B", "H")
    with pytest.raises(UnknownModeError):
        reg.indices("B")


# ПРЕОБРАЗОВАНИЯ

def test_identity_transform_keeps_state(two_modes):
    state = _random_state(two_modes, 3, seed=1)
    identity = ModeTransform((0, 1, 2, 3), (0, 1, 2, 3), np.eye(4))
    assert apply_transform(state, identity).isclose(state)


def test_splitter_on_single_photon(two_modes):
    """|1,0> -> (|1,0> + |0,1>)/sqrt(2) в соглашении поворота."""
    out = apply_transform(FockStateVector.basis(two_modes, {0: 1}), _splitter())
    assert out.amplitude((1, 0, 0, 0)) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude((0, 0, 1, 0)) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude((0, 1, 0, 0)) == 0


def test_hong_ou_mandel_dip(two_modes):
    """
    |1,1> на делителе 50:50: совпадений нет, (|2,0> - |0,2>)/sqrt(2) с точностью до общей фазы.
    """
    out = apply_transform(FockStateVector.basis(two_modes, {0: 1, 2: 1}), _splitter())
    expected = FockStateVector.from_terms(two_modes, 4, {(2, 0, 0, 0): 1 / math.sqrt(2),
                                                         (0, 0, 2, 0): -1 / math.sqrt(2)})
    assert abs(out.amplitude((1, 0, 1, 0))) < 1e-12
    assert out.isclose(expected, up_to_global_phase=True)


def test_non_isometric_matrix_is_rejected():
    with pytest.raises(TransformError):
        ModeTransform((0,), (0, 1), np.array([[1.0], [1.0]]))


def test_transform_with_foreign_modes_is_rejected(ab_registry):
    far = ModeTransform((0,), (9,), np.array([[1.0]]))
    with pytest.raises(UnknownModeError):
        apply_transform(FockStateVector.vacuum(ab_registry), far)


def test_truncation_weight_is_recorded(two_modes):
    """Слагаемые выше cutoff отбрасываются, их вес остаётся в диагностике."""
    state = FockStateVector.from_terms(two_modes, 1, {(1, 0, 0, 0): 0.8, (1, 0, 1, 0): 0.6})
    assert state.truncated_weight == pytest.approx(0.36)
    assert state.amplitude((1, 0, 1, 0)) == 0

    out = apply_transform(state, _splitter())
    assert out.truncated_weight == pytest.approx(0.36)
    assert out.norm_squared() == pytest.approx(0.64)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_lossless_transform_preserves_norm(seed):
    registry = make_registry(["a", "b"])
    state = _random_state(registry, 4, seed)
    u = _random_unitary(3, seed)
    out = apply_transform(state, ModeTransform((0, 1, 2), (0, 1, 2), u))
    assert out.norm_squared() == pytest.approx(state.norm_squared(), abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_composition_matches_sequential_application(seed):
    registry = make_registry(["a", "b"])
    state = _random_state(registry, 4, seed)
    first = ModeTransform((0, 1, 2), (0, 1, 2), _random_unitary(3, seed))
    second = ModeTransform((1, 2, 3), (1, 2, 3), _random_unitary(3, seed + 1))

    sequential = apply_transform(apply_transform(state, first), second)
    composed = apply_transform(state, second.after(first))
    assert sequential.isclose(composed, atol=1e-10)


# ПОТЕРИ И КОГЕРЕНТНЫЕ СОСТОЯНИЯ

@settings(max_examples=20, deadline=None)
@given(transmittance=st.floats(0, 1), n=st.integers(0, 3))
def test_loss_dilation_preserves_total_probability(transmittance, n):
    registry = make_registry(["A", "L"])
    state = FockStateVector.basis(registry, {0: n}, cutoff=3)
    out = apply_transform(state, loss_channel(registry, "A", transmittance, "L"))
    loss_h = registry.index("L", "H")
    total = sum(project_occupation(out, loss_h, k).norm_squared() for k in range(4))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_loss_binomial_statistics():
    """Один фотон через T: вероятность дойти равна T."""
    registry = make_registry(["A", "L"])
    out = apply_transform(FockStateVector.basis(registry, {0: 1}), loss_channel(registry, "A", 0.3, "L"))
    assert project_occupation(out, 0, 1).norm_squared() == pytest.approx(0.3)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_consecutive_losses_multiply(n):
    """Потери T1, затем T2 дают на моде A то же распределение, что одни потери T1*T2."""
    t1, t2 = 0.6, 0.25
    two_stage = make_registry(["A", "L1", "L2"])
    state = FockStateVector.basis(two_stage, {0: n}, cutoff=3)
    state = apply_transform(state, loss_channel(two_stage, "A", t1, "L1"))
    state = apply_transform(state, loss_channel(two_stage, "A", t2, "L2"))

    one_stage = make_registry(["A", "L"])
    single = apply_transform(FockStateVector.basis(one_stage, {0: n}, cutoff=3),
                             loss_channel(one_stage, "A", t1 * t2, "L"))

    for k in range(n + 1):
        expected = math.comb(n, k) * (t1 * t2) ** k * (1 - t1 * t2) ** (n - k)
        assert project_occupation(state, 0, k).norm_squared() == pytest.approx(expected, abs=1e-12)
        assert project_occupation(single, 0, k).norm_squared() == pytest.approx(expected, abs=1e-12)


def test_coherent_state_stays_coherent_under_loss():
    """|alpha> через потери T -> |sqrt(T) alpha>_A |sqrt(1-T) alpha>_L, по слагаемым до обрезки."""
    registry = make_registry(["A", "L"])
    alpha, t, cutoff = 0.4 + 0.2j, 0.35, 4
    a_h, l_h = registry.index("A", "H"), registry.index("L", "H")

    state = coherent_product(registry, {a_h: alpha}, cutoff)
    channel = loss_channel(registry, "A", t, "L")
    out = apply_transform(state, channel)
    expected = coherent_product(registry, propagate_coherent({a_h: alpha}, channel), cutoff)

    assert propagate_coherent({a_h: alpha}, channel)[l_h] == pytest.approx(math.sqrt(1 - t) * alpha)
    # Полное число фотонов сохраняется, поэтому обрезка одинаково режет оба состояния
    assert out.isclose(expected, atol=1e-12)


# ТЕНЗОРНОЕ ПРОИЗВЕДЕНИЕ И ПРОЕКЦИИ

def test_tensor_of_basis_states(ab_registry):
    a = FockStateVector.basis(ab_registry, {0: 1})
    b = FockStateVector.vacuum(ab_registry)
    assert tensor(a, b).amplitude((1, 0, 0, 0)) == pytest.approx(1)


def test_tensor_norm_multiplies(ab_registry):
    a = FockStateVector.from_terms(ab_registry, 4, {(1, 0, 0, 0): 0.6, (0, 1, 0, 0): 0.5}, normalized=False)
    b = FockStateVector.from_terms(ab_registry, 4, {(0, 0, 1, 0): 0.7, (0, 0, 0, 0): 0.2}, normalized=False)
    assert tensor(a, b).norm_squared() == pytest.approx(a.norm_squared() * b.norm_squared())


def test_tensor_of_overlapping_states_fails(ab_registry):
    a = FockStateVector.basis(ab_registry, {0: 1})
    with pytest.raises(ConfigurationError):
        tensor(a, a)


def test_projection_probabilities(two_modes):
    superposition = FockStateVector.from_terms(two_modes, 4, {(1, 0, 0, 0): 1 / math.sqrt(2),
                                                              (0, 0, 1, 0): 1 / math.sqrt(2)})
    empty_first = project_occupation(superposition, 0, 0)
    assert empty_first.norm_squared() == pytest.approx(0.5)
    assert empty_first.amplitude((0, 0, 1, 0)) == pytest.approx(1 / math.sqrt(2))
    assert not empty_first.normalized

    total = sum(project_occupation(superposition, 0, n).norm_squared() for n in range(5))
    assert total == pytest.approx(superposition.norm_squared())


# МАТРИЦЫ ПЛОТНОСТИ

def test_phi_plus_reduces_to_pure_density_matrix(ab_registry):
    a_h, a_v = ab_registry.index("A", "H"), ab_registry.index("A", "V")
    b_h, b_v = ab_registry.index("B", "H"), ab_registry.index("B", "V")
    hh, vv = [0] * 4, [0] * 4
    hh[a_h] = hh[b_h] = 1
    vv[a_v] = vv[b_v] = 1
    state = FockStateVector.from_terms(ab_registry, 4, {tuple(hh): PHI_PLUS[0], tuple(vv): PHI_PLUS[3]})

    dm = reduce_to_polarization_dm(state, "A", "B")
    assert dm.trace == pytest.approx(1.0)
    assert fidelity_to_phi_plus(dm) == pytest.approx(1.0)
    dm.validate()


def test_entanglement_with_loss_mode_gives_mixed_state():
    """Фотон A_V сопровождается фотоном в моде потерь: когерентность HH-VV пропадает."""
    reg = make_registry(["A", "B", "L"])
    hh = [0] * len(reg)
    vv = [0] * len(reg)
    hh[reg.index("A", "H")] = hh[reg.index("B", "H")] = 1
    vv[reg.index("A", "V")] = vv[reg.index("B", "V")] = 1
    vv[reg.index("L", "H")] = 1
    state = FockStateVector.from_terms(reg, 4, {tuple(hh): 1 / math.sqrt(2), tuple(vv): 1 / math.sqrt(2)})

    dm = reduce_to_polarization_dm(state, "A", "B")
    assert dm.purity() < 1
    assert abs(dm.element("HH", "VV")) < 1e-15
    assert fidelity_to_phi_plus(dm) == pytest.approx(0.5)


def test_fidelity_reference_values():
    assert fidelity_to_phi_plus(PolarizationDensityMatrix.from_pure(PHI_PLUS)) == pytest.approx(1.0)
    assert fidelity_to_phi_plus(PolarizationDensityMatrix(np.eye(4) / 4)) == pytest.approx(0.25)
    assert fidelity_to_phi_plus(PolarizationDensityMatrix(np.diag([0.5, 0, 0, 0.5]))) == pytest.approx(0.5)


def test_fidelity_of_empty_sector_is_undefined():
    with pytest.raises(EmptyPostSelectionError):
        fidelity_to_phi_plus(PolarizationDensityMatrix(np.zeros((4, 4))))
