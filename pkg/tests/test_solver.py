import numpy as np
import pytest
from scipy import sparse

from fibernet.assembly import Assembler, HingeStates
from fibernet.beam import FiberSection
from fibernet.element import SchemeConfig
from fibernet.errors import SingularMatrixError
from fibernet.netgen import NetworkSpec, generate
from fibernet.network import NetworkModel, chain_model
from fibernet.scenarios import cantilever_delta, cantilever_model, cantilever_oracle
from fibernet.solver import SolveConfig, Solver, assemble, factorize, linear_solve, run, solve_step

BAR = FiberSection.square(1.0, E=1.0, G_shear=0.5, k_shear=5 / 6, N_bar=1.0, G_f=0.1)


@pytest.fixture(scope="module")
def small_net():
    return generate(NetworkSpec(width=4.0, height=2.0, density=300.0, seed=3))


def rotated_bar(n_el=3, angle=0.7):
    """Bar along an inclined axis, not planar-constrained."""
    c, s = np.cos(angle), np.sin(angle)
    x = np.linspace(0, 1.0, n_el + 1)
    nodes = np.column_stack([c * x, s * x, 0.3 * x])
    elems = np.column_stack([np.arange(n_el), np.arange(1, n_el + 1)])
    return NetworkModel(nodes=nodes, elements=elems, element_section=np.zeros(n_el, int),
                        element_fiber=np.zeros(n_el, int), sections=[BAR], fixed=[0],
                        moving=[n_el], width=1.0, height=1.0, thickness=1.0, planar=False)


class TestAssemble:
    def test_zero_state(self, small_net):
        n = small_net.n_elements
        K, r, f = assemble(small_net, HingeStates.virgin(n), np.zeros(6 * small_net.n_nodes),
                           SchemeConfig())
        assert np.abs(r).max() == 0.0
        assert K.shape == (6 * small_net.n_nodes,) * 2

    def test_single_element_stretch(self):
        m = chain_model(BAR, 2.0, 1)
        d = np.zeros(12)
        d[6] = 0.01
        _, _, f = assemble(m, HingeStates.virgin(1), d, SchemeConfig())
        assert f[6] == pytest.approx(BAR.EA / 2.0 * 0.01)

    def test_symmetric(self, small_net):
        rng = np.random.default_rng(0)
        n = small_net.n_elements
        states = HingeStates(np.zeros(n), rng.uniform(0, 0.5, n), rng.random(n) < 0.1,
                             rng.random(n) < 0.3)
        d = rng.normal(scale=0.05, size=6 * small_net.n_nodes)
        for scheme in ("staggered", "hybrid", "monolithic"):
            K, _, _ = assemble(small_net, states, d, SchemeConfig(scheme))
            assert abs(K - K.T).max() <= 1e-12 * abs(K).max()

    def test_self_equilibrated(self):
        rng = np.random.default_rng(1)
        m = rotated_bar(4)
        d = rng.normal(scale=0.05, size=6 * m.n_nodes)
        _, _, f = assemble(m, HingeStates.virgin(4), d, SchemeConfig())
        x = m.nodes
        modes = []
        for i in range(3):
            t = np.zeros((m.n_nodes, 6))
            t[:, i] = 1.0
            modes.append(t.ravel())
        for i in range(3):
            rot = np.zeros((m.n_nodes, 6))
            w = np.eye(3)[i]
            rot[:, :3] = np.cross(w, x)
            rot[:, 3:] = w
            modes.append(rot.ravel())
        for mode in modes:
            assert abs(mode @ f) <= 1e-10 * np.linalg.norm(f)

    def test_free_block_matches_full(self, small_net):
        asm = Assembler(small_net, SchemeConfig())
        ev = asm.evaluate(np.zeros(asm.n_dof), HingeStates.virgin(small_net.n_elements))
        full = asm.stiffness_full(ev)[asm.free][:, asm.free]
        assert abs(full - asm.stiffness_free(ev)).max() <= 1e-14 * abs(full).max()


class TestLinearSolve:
    def test_identity(self):
        rhs = np.arange(5.0)
        np.testing.assert_array_equal(linear_solve(sparse.eye(5), rhs), rhs)

    def test_two_by_two(self):
        K = sparse.csr_matrix([[4.0, 1.0], [1.0, 3.0]])
        np.testing.assert_allclose(linear_solve(K, [1.0, 2.0]), [1 / 11, 7 / 11], rtol=1e-14)

    def test_random_spd(self):
        rng = np.random.default_rng(7)
        A = rng.normal(size=(50, 50))
        K = A @ A.T + 50 * np.eye(50)
        b = rng.normal(size=50)
        np.testing.assert_allclose(linear_solve(sparse.csr_matrix(K), b), np.linalg.solve(K, b),
                                   rtol=1e-9, atol=1e-12)

    def test_indefinite(self):
        K = sparse.csr_matrix([[1.0, 2.0], [2.0, 1.0]])
        x = linear_solve(K, [3.0, 3.0])
        np.testing.assert_allclose(x, [1.0, 1.0])
        assert factorize(K).nonpositive_pivots == 1

    def test_singular_reports_dof(self):
        K = sparse.csr_matrix(np.diag([1.0, 0.0, 2.0]))
        with pytest.raises(SingularMatrixError) as info:
            linear_solve(K, np.ones(3), dof_ids=[10, 11, 12])
        assert info.value.dof == 11


class TestSolveStep:
    def test_elastic_single_iteration(self):
        m = chain_model(BAR, 1.0, 4)
        n = 4
        for u in (1e-4, 1e-2, 5e-2):
            d, _, its = solve_step(m, HingeStates.virgin(n), np.zeros(6 * 5), u, SolveConfig())
            assert its == 1
            assert d[6 * 4] == u

    def test_zero_increment(self):
        m = chain_model(BAR, 1.0, 4)
        d0 = np.zeros(30)
        d, states, its = solve_step(m, HingeStates.virgin(4), d0, 0.0, SolveConfig())
        assert its == 0
        np.testing.assert_array_equal(d, d0)

    def test_hybrid_softening_step_converges(self):
        m = cantilever_model(0.1, 10)
        cfg = SolveConfig(scheme=SchemeConfig("hybrid"))
        solver = Solver(m, cfg)
        d = np.zeros(solver.asm.n_dof)
        states = HingeStates.virgin(10)
        for u in (0.098, 0.1, 0.102):
            res = solver.solve_step(d, states, u)
            d, states = res.d, res.states
        assert states.alpha[0] > 0

    def test_failure_rolls_back(self):
        m = cantilever_model(0.05, 10)
        solver = Solver(m, SolveConfig(scheme=SchemeConfig("staggered"), max_iters=3))
        states = HingeStates.virgin(10)
        d = np.zeros(solver.asm.n_dof)
        from fibernet.solver import StepFailed

        with pytest.raises(StepFailed):
            solver.solve_step(d, states, 0.15)
        assert not states.alpha.any()
        assert not d.any()


class TestRun:
    def test_single_element_oracle(self):
        gf = 0.1
        rep = run(cantilever_model(gf, 1), SolveConfig(n_steps=300, delta_0=cantilever_delta(gf)))
        u, f = rep.curve()
        np.testing.assert_allclose(f, cantilever_oracle(u, gf), rtol=1e-10, atol=1e-12)
        assert rep.cumulative_iterations == sum(r.iterations for r in rep.records)

    def test_records_monotone_and_ruptures_grow(self, small_net):
        rep = run(small_net, SolveConfig(n_steps=40, delta_0=1.5))
        u = [r.u for r in rep.records]
        assert np.all(np.diff(u) > 0)
        nr = [r.n_ruptured for r in rep.records]
        assert np.all(np.diff(nr) >= 0)

    def test_deterministic(self, small_net):
        cfg = SolveConfig(n_steps=30, delta_0=1.5)
        a, b = run(small_net, cfg), run(small_net, cfg)
        assert [r.reaction for r in a.records] == [r.reaction for r in b.records]
        np.testing.assert_array_equal(a.final_d, b.final_d)

    def test_one_huge_step(self):
        rep = run(cantilever_model(0.1, 10), SolveConfig(scheme=SchemeConfig("staggered"), n_steps=1,
                                                         delta_0=1.0))
        if rep.converged:
            u, f = rep.curve()
            np.testing.assert_allclose(f, cantilever_oracle(u, 0.1), atol=1e-6)
        else:
            assert rep.failed_step == 1 and not rep.records

    def test_bisection_recovers(self, monkeypatch):
        # a step "fails" whenever its increment exceeds 0.03; halving must get through
        from fibernet import solver as solver_mod

        real = solver_mod.Solver.solve_step

        def picky(self, d_prev, states_n, u_target):
            if u_target - d_prev[self.asm.moving_dofs].max() > 0.03 + 1e-15:
                raise solver_mod.StepFailed("increment too large", 2)
            return real(self, d_prev, states_n, u_target)

        monkeypatch.setattr(solver_mod.Solver, "solve_step", picky)
        m = chain_model(BAR, 1.0, 3)
        plain = run(m, SolveConfig(n_steps=2, delta_0=0.2))
        assert plain.termination == "step_failed" and plain.failed_step == 1
        bis = run(m, SolveConfig(n_steps=2, delta_0=0.2, bisect=True))
        assert bis.converged
        assert [r.u for r in bis.records] == [0.1, 0.2]
        # 0->0.1 fails, both halves fail once more, then four quarter steps converge
        assert bis.records[0].iterations == 2 + 2 + 2 + 4

    def test_bisection_gives_up(self, monkeypatch):
        from fibernet import solver as solver_mod

        def never(self, d_prev, states_n, u_target):
            raise solver_mod.StepFailed("nope", 1)

        monkeypatch.setattr(solver_mod.Solver, "solve_step", never)
        rep = run(chain_model(BAR, 1.0, 3), SolveConfig(n_steps=2, delta_0=0.2, bisect=True))
        assert rep.failed_step == 1
        # the initial attempt plus one per halving level
        assert rep.cumulative_iterations == 1 + solver_mod.MAX_BISECTIONS

    def test_checkpoint_dumps(self):
        rep = run(cantilever_model(0.1, 2), SolveConfig(n_steps=10, delta_0=0.3, checkpoints=(5, 10)))
        assert [d.step for d in rep.dumps] == [5, 10]
        assert rep.dumps[-1].ruptured[0]

    def test_energy_balance(self):
        gf = 0.2
        rep = run(cantilever_model(gf, 10), SolveConfig(scheme=SchemeConfig("monolithic"), n_steps=500,
                                                        delta_0=cantilever_delta(gf)))
        for r in rep.records:
            total = r.elastic_energy + r.dissipation
            assert abs(r.external_work - total) <= 0.01 * max(r.external_work, 1e-12)

    def test_hybrid_no_nonpositive_pivot(self, small_net):
        rep = run(small_net, SolveConfig(scheme=SchemeConfig("hybrid"), n_steps=40, delta_0=1.5))
        assert rep.nonpositive_pivots == 0

    def test_elastic_iterations_equal_across_schemes(self):
        m = chain_model(BAR, 1.0, 5)
        counts = {s: run(m, SolveConfig(scheme=SchemeConfig(s), n_steps=10, delta_0=0.05)).cumulative_iterations
                  for s in ("staggered", "hybrid", "monolithic")}
        assert len(set(counts.values())) == 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolveConfig(n_steps=0)
        with pytest.raises(ValueError):
            SolveConfig(tol_rel=0.0)
        with pytest.raises(ValueError):
            SolveConfig(max_iters=0)
