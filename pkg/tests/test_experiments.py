import json
import threading
import time
import urllib.request

import pytest

from qdhf.config import ConfigError, ExperimentConfig
from qdhf.experiments import ServeSession, bench, run_trials, sweep_budget
from qdhf.feedback import BudgetExhausted


def fast_cfg(**kw):
    base = dict(
        task="arm",
        strategy="gt",
        seed=0,
        total_iterations=3,
        update_iterations=(),
        batch_size=10,
        budget=12,
        epochs=5,
        finetune_epochs=2,
        archive_shape=(10, 10),
    )
    base.update(kw)
    return ExperimentConfig(**base)


class Responder(threading.Thread):
    """Polls the service and answers judgment requests like a labeler would."""

    def __init__(self, base_url, limit=None, choice="A"):
        super().__init__(daemon=True)
        self.base_url = base_url
        self.limit = limit
        self.choice = choice
        self.answered = 0
        self.saw_pending = False
        self._stop = threading.Event()

    def run(self):
        while not self._stop.is_set():
            if self.limit is not None and self.answered >= self.limit:
                return
            try:
                with urllib.request.urlopen(
                    f"{self.base_url}/api/v1/triplets/next", timeout=2
                ) as resp:
                    if resp.status != 200:
                        time.sleep(0.01)
                        continue
                    body = json.loads(resp.read())
            except Exception:
                time.sleep(0.01)
                continue
            self.saw_pending = True
            req = urllib.request.Request(
                f"{self.base_url}/api/v1/triplets/{body['request_id']}",
                data=json.dumps({"choice": self.choice}).encode(),
                method="POST",
            )
            try:
                urllib.request.urlopen(req, timeout=2).read()
                self.answered += 1
            except Exception:
                time.sleep(0.01)

    def stop(self):
        self._stop.set()


class TestTrials:
    def test_seeds_increment_from_base(self):
        results = run_trials(fast_cfg(seed=5), 3)
        assert [r.seed for r in results] == [5, 6, 7]

    def test_needs_at_least_one(self):
        with pytest.raises(ValueError):
            run_trials(fast_cfg(), 0)

    def test_bench_returns_results_per_strategy(self):
        summary, results = bench(fast_cfg(), 1, strategies=("gt",))
        assert set(results) == {"gt"}
        assert len(results["gt"]) == 1
        assert summary[0]["strategy"] == "gt"

    def test_sweep_budget_rejects_bad_input(self):
        with pytest.raises(ValueError):
            sweep_budget([], fast_cfg(), 1, ("qdhf-offline",))
        with pytest.raises(ValueError):
            sweep_budget([-5], fast_cfg(), 1, ("qdhf-offline",))


class TestServeSession:
    def test_requires_learned_judgment_strategy(self, tmp_path):
        with pytest.raises(ConfigError):
            ServeSession(fast_cfg(strategy="gt", out=str(tmp_path / "o")), port=0)

    def test_requires_out_dir(self):
        with pytest.raises(ConfigError):
            ServeSession(fast_cfg(strategy="qdhf-offline", update_iterations=(0,)), port=0)

    def test_refuses_nonempty_out(self, tmp_path):
        out = tmp_path / "o"
        out.mkdir()
        (out / "x").write_text("x")
        cfg = fast_cfg(strategy="qdhf-offline", update_iterations=(0,), out=str(out))
        with pytest.raises(ConfigError):
            ServeSession(cfg, port=0)
        ServeSession(cfg, port=0, force=True).shutdown()

    def test_human_loop_runs_to_completion(self, tmp_path):
        out = tmp_path / "run"
        cfg = fast_cfg(strategy="qdhf-offline", update_iterations=(0,), out=str(out))
        session = ServeSession(cfg, port=0)
        session.start()
        responder = Responder(session.service.base_url)
        responder.start()
        try:
            assert session.wait(timeout=60)
        finally:
            responder.stop()
            session.shutdown()
        assert session.error is None
        assert responder.answered == 12
        status = session.board.snapshot()
        assert status["state"] == "done"
        assert status["final"]["judgments_used"] == 12
        assert status["iteration"] == 3

        names = {p.name for p in out.iterdir()}
        assert {"archive.json", "metrics.csv", "config.json", "model.json", "judgments.jsonl"} <= names
        lines = [json.loads(l) for l in (out / "judgments.jsonl").read_text().splitlines()]
        assert len(lines) == 12
        assert all(rec["source"] == "human" for rec in lines)

        ckpt = out / "checkpoint"
        assert (ckpt / "state.json").exists()
        state = json.loads((ckpt / "state.json").read_text())
        assert state["interrupted"] is False
        assert state["budget"] == {"total": 12, "used": 12}
        assert (ckpt / "model.json").exists()

    def test_interrupt_checkpoints_partial_state(self, tmp_path):
        out = tmp_path / "run"
        cfg = fast_cfg(
            strategy="qdhf-online",
            total_iterations=6,
            update_iterations=(0, 2),
            budget=20,
            out=str(out),
        )
        session = ServeSession(cfg, port=0)
        session.start()
        # answer only the first update's slice, then a few of the second
        responder = Responder(session.service.base_url, limit=13)
        responder.start()
        try:
            deadline = time.time() + 30
            while responder.answered < 13 and time.time() < deadline:
                time.sleep(0.02)
            assert responder.answered == 13
            session.interrupt()
        finally:
            responder.stop()
            session.shutdown()
        assert isinstance(session.error, BudgetExhausted)
        assert session.board.snapshot()["state"] == "failed"
        state = json.loads((out / "checkpoint" / "state.json").read_text())
        assert state["interrupted"] is True
        # the second slice was never fully collected, so it was never charged
        assert state["budget"] == {"total": 20, "used": 10}
        assert state["iteration"] == 2
