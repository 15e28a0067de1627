import numpy as np
import pytest

from qfbcool.errors import DimensionMismatch, StepTooLarge
from qfbcool.model import (
    ModelSpec,
    build_liouvillian,
    check_assumptions,
    evolve_average,
    hermitian_basis,
    lindblad_generator,
    unvectorize,
    vectorize,
    verify_unique_equilibrium,
)
from qfbcool.quantum import random_density
from qfbcool.systems import build_qutrit_preset

from .conftest import random_hermitian

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


class TestAssumptions:
    def test_qutrit_cooling(self, qutrit):
        rep = check_assumptions(qutrit)
        assert rep.passed
        assert rep.a3_spectral.value == pytest.approx(2.0)  # 3*2 - 4
        assert rep.unique_equilibrium.value == 8

    def test_noncommuting(self):
        rep = check_assumptions(ModelSpec(H0=SZ, L=SX, F0=np.zeros((2, 2))))
        assert not rep.a2_commute.passed
        assert rep.a2_commute.value == pytest.approx(np.linalg.norm(SZ @ SX - SX @ SZ))
        assert not rep.passed

    def test_qutrit_heating_fails_a3(self):
        rep = check_assumptions(build_qutrit_preset(mode="heating"))
        assert not rep.a3_spectral.passed
        assert rep.a3_spectral.value == pytest.approx(-2.0)  # 4 - 3*2

    def test_non_hermitian_L_reported(self):
        L = np.array([[0, 1], [0, 0]], dtype=complex)
        rep = check_assumptions(ModelSpec(H0=np.zeros((2, 2)), L=L, F0=SX))
        assert not rep.a1_hermitian.passed
        assert rep.a1_hermitian.value == 1.0

    def test_report_format(self, qutrit):
        text = check_assumptions(qutrit).format()
        assert "a3_spectral: PASS (margin=2)" in text
        assert "unique_equilibrium: PASS (rank=8)" in text

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ModelSpec(H0=SZ, L=np.eye(3), F0=SX)


class TestLiouvillian:
    def test_basis_orthonormal(self):
        B = hermitian_basis(4)
        gram = np.einsum("aij,bji->ab", B, B)
        np.testing.assert_allclose(gram, np.eye(16), atol=1e-14)

    def test_zero(self):
        np.testing.assert_array_equal(build_liouvillian(np.zeros((3, 3)), np.zeros((3, 3))), 0)

    def test_consistency_randomized(self):
        rng = np.random.default_rng(3)
        for case in range(100):
            n = 2 + case % 4
            H = random_hermitian(n, rng)
            L = random_hermitian(n, rng)
            rho = random_density(n, rng)
            lhs = unvectorize(build_liouvillian(H, L) @ vectorize(rho))
            np.testing.assert_allclose(lhs, lindblad_generator(H, L, rho), atol=1e-12)

    def test_maximally_mixed_in_kernel(self, qutrit):
        lv = build_liouvillian(qutrit.H0 + qutrit.F0, qutrit.L)
        np.testing.assert_allclose(lv @ vectorize(np.eye(3) / 3), 0, atol=1e-14)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_liouvillian(np.eye(2), np.eye(3))


class TestUniqueEquilibrium:
    def test_qutrit(self, qutrit):
        eq = verify_unique_equilibrium(qutrit)
        assert eq.unique and eq.rank == 8

    def test_qutrit_without_feedback(self):
        eq = verify_unique_equilibrium(build_qutrit_preset(f0="zero"))
        assert not eq.unique and eq.rank <= 6

    def test_heisenberg(self, heisenberg):
        eq = verify_unique_equilibrium(heisenberg)
        assert eq.unique and eq.rank == 63

    @pytest.mark.parametrize("preset", ["qutrit", "heisenberg"])
    def test_kernel_spanned_by_identity(self, preset, qutrit, heisenberg):
        spec = qutrit if preset == "qutrit" else heisenberg
        eq = verify_unique_equilibrium(spec)
        assert eq.kernel.shape[1] == 1
        k = eq.kernel[:, 0]
        mix = vectorize(np.eye(spec.dim) / spec.dim)
        mix /= np.linalg.norm(mix)
        assert abs(abs(k @ mix) - 1.0) < 1e-8

    def test_random_feedback_generic(self):
        # a random Hermitian feedback Hamiltonian generically restores uniqueness
        rng = np.random.default_rng(11)
        base = build_qutrit_preset()
        for _ in range(5):
            spec = base.with_(F0=random_hermitian(3, rng))
            assert verify_unique_equilibrium(spec).unique


class TestEvolveAverage:
    def test_stationary_without_control(self, qutrit):
        rho0 = np.diag([0.2, 0.5, 0.3]).astype(complex)
        avg = evolve_average(qutrit, 0, rho0, T=2.0)
        np.testing.assert_allclose(avg.states, np.broadcast_to(rho0, avg.states.shape), atol=1e-14)

    def test_witness_and_relaxation(self, qutrit):
        avg = evolve_average(qutrit, 1, np.diag([0, 0, 1.0]), T=50.0)
        assert avg.witness_time is not None and 0 < avg.witness_time < 50
        assert avg.lyapunov[0] == pytest.approx(4.0)
        tr = np.einsum("kii->k", avg.states)
        np.testing.assert_allclose(tr, 1.0, atol=1e-9)
        dist = np.linalg.norm(avg.states - np.eye(3) / 3, axis=(1, 2))
        assert dist[-1] < 1e-6
        # distance to the fixed point decays (checked on a coarse grid to skip oscillations)
        coarse = dist[::50]
        assert np.all(np.diff(coarse) < 0)

    def test_mixed_state_value_below_gap(self, qutrit, heisenberg):
        for spec in (qutrit, heisenberg):
            v_mix = np.trace(spec.L).real / spec.dim - spec.target_eigenvalue
            assert v_mix < spec.delta

    def test_step_too_large(self, qutrit):
        with pytest.raises(StepTooLarge):
            evolve_average(qutrit, 1, np.diag([0, 0, 1.0]), T=5.0, dt=1.0)
