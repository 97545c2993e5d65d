"""End-to-end runs: one LF sweep, a shared HF cache and a fixed test set
reused across every basis size."""
import time
from dataclasses import dataclass

from .offline import HighFidelityRunner, build_artifact, lemma_diagnostics
from .online import evaluate, reference_solutions
from .problems import get_problem
from .snapshots import sample_parameters, sweep

__all__ = ["Experiment", "prepare"]


def _quiet(msg):
    pass


@dataclass
class Experiment:
    config: object
    candidates: object
    lf: object
    runner: HighFidelityRunner
    test: object
    reference: list
    workers: object = None
    log: object = _quiet

    def build(self, N_rb):
        art = build_artifact(self.config.offline(N_rb), lf=self.lf, hf_runner=self.runner, workers=self.workers)
        self.log(
            f"offline N_rb={N_rb}: {art.metadata['hf_runs']} new HF runs "
            f"(union {art.metadata['hf_union']}), {art.metadata['timings']['total']:.2f}s"
        )
        return art

    def evaluate(self, artifact, eval_workers=1):
        t0 = time.perf_counter()
        table = evaluate(artifact, self.test, hf_reference=self.reference, workers=eval_workers)
        self.log(
            f"online N_rb={artifact.N_rb}: mean e_u={table.means['e_u']:.3e} "
            f"e_u_ref={table.means['e_u_ref']:.3e} e_u_lf={table.means['e_u_lf']:.3e} "
            f"({time.perf_counter() - t0:.2f}s)"
        )
        return table

    def run(self, N_rb):
        art = self.build(N_rb)
        return art, self.evaluate(art)

    def lemma(self, artifact):
        return lemma_diagnostics(self.lf, artifact.gamma_L.indices, artifact.gamma_f.indices)


def prepare(config, workers=None, log=_quiet):
    """Sample Γ and the test set, sweep the LF model over Γ and solve the HF
    model at every test point.

    HF reference solves run with one worker so their timings are comparable
    with the (sequential) online timings.
    """
    problem = get_problem(config.problem)
    t0 = time.perf_counter()
    cand = sample_parameters(problem, config.n_p, config.seed_train)
    lf = sweep(problem, config.lf_grid, cand, config.iteration, "low", workers)
    log(f"LF sweep: {config.n_p} solves on {config.lf_grid.label()} in {time.perf_counter() - t0:.2f}s")
    runner = HighFidelityRunner(problem, config.hf_grid, cand, config.iteration, workers)
    t0 = time.perf_counter()
    test = sample_parameters(problem, config.test_n, config.seed_test, "test")
    reference = reference_solutions(problem, config.hf_grid, test, config.iteration, workers=1)
    failed = sum(r is None for r in reference)
    log(
        f"HF reference: {config.test_n} solves on {config.hf_grid.label()} in "
        f"{time.perf_counter() - t0:.2f}s ({failed} failed)"
    )
    return Experiment(config, cand, lf, runner, test, reference, workers, log)
