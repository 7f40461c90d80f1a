import math

import numpy as np
import pytest

from grushin.cylinder import (
    ModelManifold,
    Resolution,
    assemble_spectrum,
    count_eigenvalues,
    enumerate_modes,
    mass_profile,
    test_function_average,
    test_function_limit,
    trace_difference,
    variational_sandwich,
    weyl_limit_constant,
    weyl_ratio,
)
from grushin.numerics1d import CompositePolicy, build_grid, discretize, sturm_count

COARSE = CompositePolicy(h_min=1e-2, ratio=1.2, h_tail=5e-2)
MAN = ModelManifold()


@pytest.fixture(scope="module")
def ens100():
    return assemble_spectrum(MAN, 100.0, want_vectors=True)


@pytest.fixture(scope="module")
def ens1000():
    return assemble_spectrum(MAN, 1000.0, want_vectors=True)


class TestManifold:
    def test_defaults(self):
        assert MAN.n == 1 and MAN.epsilon0 == 1.0
        assert MAN.circumferences == (2 * math.pi,)
        assert MAN.beta == 2.0 and MAN.bc.right.name == "DIRICHLET"

    def test_mu_and_keys(self):
        assert MAN.mu((3,)) == pytest.approx(9.0)
        assert MAN.mode_key((3,)) == MAN.mode_key((-3,))
        torus = ModelManifold(2, (2 * math.pi, 2 * math.pi))
        assert torus.mode_key((1, 2)) == torus.mode_key((-2, 1))
        assert torus.beta == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ModelManifold(2, (1.0,))
        with pytest.raises(ValueError):
            ModelManifold(epsilon0=0.0)
        with pytest.raises(ValueError):
            ModelManifold(bc_right="X")


class TestModes:
    def test_lambda_10(self):
        ks = [k for k, _ in enumerate_modes(MAN, 10.0)]
        assert ks == [(k,) for k in range(-5, 6)]

    def test_lambda_1(self):
        assert enumerate_modes(MAN, 1.0) == [((0,), 0.0)]

    def test_superset_at_50(self):
        lam = 50.0
        kept = {k for k, _ in enumerate_modes(MAN, lam)}
        kmax = max(abs(k[0]) for k in kept)
        excluded = [(s * k,) for k in range(kmax + 1, kmax + 6) for s in (1, -1)]
        assert not kept.intersection(excluded) and len(excluded) == 10
        grid = build_grid(CompositePolicy(1e-4, 1.05, 1e-2), 1.0)
        for k in excluded:
            T = discretize(MAN.potential(MAN.mu(k)), grid, MAN.bc)
            assert sturm_count(T, lam) == 0

    def test_two_torus_enumeration(self):
        torus = ModelManifold(2, (2 * math.pi, 2 * math.pi))
        modes = enumerate_modes(torus, 20.0)
        assert ((0, 0), 0.0) in modes
        assert all(torus.potential(mu).infimum(1.0) < 20.0 or not any(k) for k, mu in modes)


class TestAssemble:
    def test_sorted_and_symmetric(self, ens100):
        ev = ens100.eigenvalues
        assert np.all(np.diff(ev) >= 0)
        by_mode = {}
        for lam, k in zip(ev, ens100.modes):
            by_mode.setdefault(k, []).append(lam)
        for (k,), vals in by_mode.items():
            assert vals == by_mode[(-k,)]

    def test_count_agrees(self, ens100):
        assert count_eigenvalues(MAN, 100.0) == ens100.count

    def test_N_monotone(self):
        counts = [count_eigenvalues(MAN, lam, policy=COARSE) for lam in (5.0, 20.0, 60.0, 150.0)]
        assert counts == sorted(counts) and counts[-1] > 0

    def test_workers_do_not_change_result(self):
        a = assemble_spectrum(MAN, 200.0, want_vectors=True, workers=1)
        b = assemble_spectrum(MAN, 200.0, want_vectors=True, workers=3)
        np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
        assert a.modes == b.modes
        for j in (0, a.count // 2, a.count - 1):
            np.testing.assert_array_equal(a.vector(j)[0], b.vector(j)[0])

    def test_neumann_end_counts_more(self):
        man_n = ModelManifold(bc_right="N")
        for lam in (30.0, 300.0):
            assert count_eigenvalues(MAN, lam, policy=COARSE) <= count_eigenvalues(man_n, lam, policy=COARSE)

    def test_unit_mass_per_eigenfunction(self, ens100):
        for j in range(ens100.count):
            v, _ = ens100.vector(j)
            assert float(v @ v) == pytest.approx(1.0, abs=1e-12)

    def test_vectors_required(self):
        ens = assemble_spectrum(MAN, 50.0)
        with pytest.raises(ValueError):
            ens.vector(0)
        with pytest.raises(ValueError):
            mass_profile(ens, [0.0])

    def test_brute_force_lambda_30(self):
        lam = 30.0
        ens = assemble_spectrum(MAN, lam, policy=COARSE)
        grid = build_grid(COARSE, 1.0)
        total = 0
        for k in range(-10, 11):
            dense = discretize(MAN.potential(MAN.mu((k,))), grid, MAN.bc).dense()
            oracle = np.linalg.eigvalsh(dense)
            oracle = oracle[oracle < lam]
            mine = np.array([e for e, m in zip(ens.eigenvalues, ens.modes) if m == (k,)])
            assert mine.size == oracle.size
            np.testing.assert_allclose(mine, oracle, rtol=0, atol=1e-9)
            total += oracle.size
        assert total == ens.count

    def test_two_torus_smoke(self):
        torus = ModelManifold(2, (2 * math.pi, 2 * math.pi))
        ens = assemble_spectrum(torus, 60.0, want_vectors=True)
        assert ens.count == count_eigenvalues(torus, 60.0)
        rep = mass_profile(ens, [-0.5, -0.25, 0.0])
        assert rep.checks == {"range": True, "monotone": True}
        assert rep.measured[-1] == 1.0


class TestMassProfile:
    def test_full_collar_is_one(self, ens1000):
        assert mass_profile(ens1000, [0.0]).measured == [1.0]

    def test_shape_at_1e3(self, ens1000):
        gammas = [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0]
        rep = mass_profile(ens1000, gammas)
        assert rep.passed
        assert rep.predicted == [2 * (0.5 + g) for g in gammas]
        slope = np.polyfit(gammas, rep.measured, 1)[0]
        assert 1.6 <= slope <= 2.4

    def test_rejects_out_of_range(self, ens100):
        with pytest.raises(ValueError):
            mass_profile(ens100, [-0.7])


class TestTestFunction:
    def test_constant_one(self, ens1000):
        assert test_function_average(ens1000, lambda g: np.ones_like(g)) == pytest.approx(1.0, abs=1e-12)

    def test_indicator_matches_mass_profile(self, ens1000):
        for g in (-0.4, -0.25, -0.1):
            f = lambda t, g=g: (t <= g).astype(float)  # noqa: E731
            F = mass_profile(ens1000, [g]).measured[0]
            assert test_function_average(ens1000, f) == pytest.approx(F, abs=1e-12)

    def test_limits(self):
        assert test_function_limit(lambda g: np.ones_like(g)) == pytest.approx(1.0)
        assert test_function_limit(lambda g: g) == pytest.approx(-0.25)

    def test_needs_lambda_above_one(self):
        ens = assemble_spectrum(MAN, 1.0, want_vectors=True, policy=COARSE)
        with pytest.raises(ValueError):
            test_function_average(ens, lambda g: g)


class TestTraceDifference:
    def test_zero_delta(self):
        rep = trace_difference(MAN, 300.0, -0.25, 0.0)
        assert rep.measured == [0.0] and rep.passed

    @pytest.mark.parametrize("delta", [0.5, 0.1, -0.1, -0.5])
    def test_sign_follows_delta(self, delta):
        rep = trace_difference(MAN, 300.0, -0.25, delta)
        assert rep.passed
        assert np.sign(rep.measured[0]) == np.sign(delta)

    def test_ratio_window_at_1e3(self):
        rep = trace_difference(MAN, 1000.0, -0.25, 0.5)
        assert 0.6 <= rep.ratios[0] <= 1.3


class TestSandwich:
    @pytest.mark.parametrize("delta", [0.25, -0.25])
    def test_holds_at_100(self, ens100, delta):
        assert variational_sandwich(ens100, -0.25, delta).checks["sandwich"]

    def test_gap_shrinks(self, ens100):
        gaps = []
        for d in (0.25, 0.1, 0.05):
            lower = variational_sandwich(ens100, -0.25, d).metadata["bound"]
            upper = variational_sandwich(ens100, -0.25, -d).metadata["bound"]
            mass = variational_sandwich(ens100, -0.25, d).metadata["mass"]
            assert lower <= mass + 1e-9 * mass and mass <= upper + 1e-9 * mass
            gaps.append(upper - lower)
        assert gaps[0] > gaps[1] > gaps[2] >= 0

    def test_zero_delta_rejected(self, ens100):
        with pytest.raises(ValueError):
            variational_sandwich(ens100, -0.25, 0.0)


class TestWeyl:
    def test_limit_constant(self):
        assert weyl_limit_constant(MAN) == pytest.approx(0.25, abs=1e-12)
        # volume scaling: a longer circle doubles the constant
        assert weyl_limit_constant(ModelManifold(circumferences=(4 * math.pi,))) == pytest.approx(0.5)

    def test_ratio_at_1e3(self):
        rep = weyl_ratio(MAN, 1000.0)
        assert rep.metadata["N"] == count_eigenvalues(MAN, 1000.0)
        assert abs(rep.measured[0] / rep.predicted[0] - 1) <= 0.15

    def test_resolution_object(self):
        pol = Resolution().policy(1e4, 4.0, 2.0)
        assert pol.h_min <= 0.1 * 1e4**-0.5
