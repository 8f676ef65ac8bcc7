"""Experiment runner: training/evaluation cadence, metrics files, aggregation."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .algos import Agent, Trainer, make_agent
from .algos.common import RngFactory
from .config import ExperimentConfig, dump_text, parse_text  # noqa: F401 (re-exported)
from .diffcore import load_checkpoint, save_checkpoint
from .envs import make_env
from .errors import AlignmentError, ConfigError, InputError, NumericError
from .replay import ReplayBuffer, collect_validation

log = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
TIMING_FILE = "timing.jsonl"
SUMMARY_FILE = "summary.csv"
CONFIG_FILE = "config.cfg"
CHECKPOINT_FILE = "checkpoint.npz"


def _json_value(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def record_to_json(rec: diag.MetricsRecord) -> str:
    d = rec.to_dict()
    out = {"env_step": int(d.pop("env_step"))}
    out.update({k: _json_value(v) for k, v in d.items()})
    return json.dumps(out)


def record_from_json(line: str) -> diag.MetricsRecord:
    d = json.loads(line)
    return diag.MetricsRecord(**d)


def build_envs(cfg: ExperimentConfig, rngs: RngFactory):
    kw = dict(cfg.env_overrides)
    if cfg.env == "nav_mixed":
        kw.setdefault("penalty_weight", cfg.effective_penalty)
        kw.setdefault("constrained", cfg.constrained)
    return make_env(cfg.env, rngs.get("env"), **kw), make_env(cfg.env, rngs.get("eval_env"), **kw)


def build_agent(cfg: ExperimentConfig, env, seed: int) -> Agent:
    return make_agent(cfg.algorithm, env.spec.obs_dim, env.spec.act_dim, cfg.agent, seed)


def evaluate_checkpoint_metrics(agent: Agent, env, cfg: ExperimentConfig, env_step: int,
                                act_rng: np.random.Generator, diag_rng: np.random.Generator) -> diag.MetricsRecord:
    """Collect held-out episodes with the stochastic policy and measure them."""
    val = collect_validation(env, agent, cfg.eval_episodes, act_rng)
    td = diag.validation_td_error(agent, val, diag_rng)
    qe = diag.q_estimation_error(agent, val, cfg.agent.gamma)
    eps = val.episodes
    return diag.MetricsRecord(
        env_step=env_step,
        episode_reward=float(np.mean([e.total_reward for e in eps])),
        episode_incentive=float(np.mean([e.total_incentive for e in eps])),
        episode_cost=float(np.mean([e.total_cost for e in eps])),
        td_error_reward=td["reward"],
        td_error_cost=td.get("cost"),
        q_error_reward=qe["reward"],
        q_error_cost=qe.get("cost"),
        alpha=agent.alpha,
        beta=agent.beta,
    )


def save_agent(agent: Agent, cfg: ExperimentConfig, path, env_step: int, seed: int) -> None:
    meta = {k: np.asarray(v) for k, v in agent.meta().items()}
    meta["env_step"] = np.asarray(env_step)
    meta["seed"] = np.asarray(seed)
    meta["config"] = np.asarray(dump_text(cfg))
    save_checkpoint(path, agent.stores(), meta)


def load_agent(path) -> tuple[Agent, ExperimentConfig, dict]:
    arrays = load_checkpoint(path)
    meta = {k[5:]: v for k, v in arrays.items() if k.startswith("meta/")}
    cfg = parse_text(str(meta["config"]))
    cfg.validate()
    rngs = RngFactory(int(meta["seed"]))
    env, _ = build_envs(cfg, rngs)
    agent = build_agent(cfg, env, int(meta["seed"]))
    for key, store in agent.stores().items():
        store.load_state_arrays(arrays, prefix=f"{key}/")
    agent.load_meta(meta)
    return agent, cfg, meta


def run_experiment(cfg: ExperimentConfig, seed: int, out_dir=None, progress: bool = False) -> diag.RunSummary:
    """Train for ``total_env_steps`` and evaluate every ``eval_interval`` steps.

    With ``out_dir`` the metrics are appended to ``metrics.jsonl`` as they are
    produced. The file is a deterministic function of ``(cfg, seed)``; wall
    clock times go to ``timing.jsonl``.
    """
    cfg.validate()
    rngs = RngFactory(seed)
    env, eval_env = build_envs(cfg, rngs)
    agent = build_agent(cfg, env, seed)
    buffer = ReplayBuffer(env.spec.obs_dim, env.spec.act_dim, min(cfg.buffer_capacity, max(cfg.total_env_steps, 1)))
    trainer = Trainer(agent, env, buffer, rngs.get("act"))
    eval_rng = rngs.get("eval_act")
    diag_rng = rngs.get("diag")

    out = Path(out_dir) if out_dir is not None else None
    mfh = tfh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / CONFIG_FILE).write_text(dump_text(cfg))
        mfh = open(out / METRICS_FILE, "w")
        tfh = open(out / TIMING_FILE, "w")
    summary = diag.RunSummary()
    summary.aborted = None
    t0 = time.perf_counter()
    try:
        for _ in range(cfg.total_env_steps):
            trainer.step()
            step = trainer.env_step
            if step % cfg.eval_interval == 0:
                rec = evaluate_checkpoint_metrics(agent, eval_env, cfg, step, eval_rng, diag_rng)
                summary.records.append(rec)
                if mfh is not None:
                    mfh.write(record_to_json(rec) + "\n")
                    mfh.flush()
                    tfh.write(json.dumps({"env_step": step, "wall_clock": time.perf_counter() - t0}) + "\n")
                    tfh.flush()
                if progress:
                    log.info("%s seed=%d step=%d reward=%.3f cost=%.2f", cfg.algorithm, seed, step,
                             rec.episode_reward, rec.episode_cost)
            if cfg.checkpoint_interval and step % cfg.checkpoint_interval == 0 and out is not None:
                save_agent(agent, cfg, out / f"checkpoint_{step}.npz", step, seed)
            agent.maybe_reset(step)
    except NumericError as exc:
        summary.aborted = {"env_step": trainer.env_step, "error": exc.name, "message": str(exc)}
        log.error("run aborted at step %d: %s", trainer.env_step, exc)
        if out is not None:
            (out / "abort.json").write_text(json.dumps(summary.aborted) + "\n")
    finally:
        if mfh is not None:
            mfh.close()
            tfh.close()
    if out is not None:
        save_agent(agent, cfg, out / CHECKPOINT_FILE, trainer.env_step, seed)
        write_summary_csv(summary, out / SUMMARY_FILE)
    summary.agent = agent
    return summary


def write_summary_csv(summary: diag.RunSummary, path) -> None:
    names = [f.name for f in dataclasses.fields(diag.MetricsRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window"] + names)
        for rec in summary.records:
            w.writerow(["checkpoint"] + [_csv(getattr(rec, n)) for n in names])
        if summary.records:
            w.writerow(["final_window"] + [_csv(_final(summary, n)) for n in names])


def _final(summary, name):
    vals = [getattr(r, name) for r in summary.final_window()]
    if any(v is None for v in vals):
        return None
    if name == "env_step":
        return vals[-1]
    return float(np.mean(vals))


def _csv(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return v


def read_metrics(run_dir) -> diag.RunSummary:
    path = Path(run_dir) / METRICS_FILE
    with open(path) as fh:
        records = [record_from_json(line) for line in fh if line.strip()]
    return diag.RunSummary(records)


def read_config(run_dir) -> ExperimentConfig:
    return parse_text((Path(run_dir) / CONFIG_FILE).read_text())


def aggregate(run_dirs, metric: str = "episode_reward", n_thresholds: int = 21):
    """Per-checkpoint IQM/min/max across runs and the final-checkpoint profile.

    Returns ``(table_rows, profile_rows)``.
    """
    if not run_dirs:
        raise InputError("aggregate needs at least one run")
    runs = sorted((str(d) for d in run_dirs))
    summaries = [read_metrics(d) for d in runs]
    steps = [tuple(r.env_step for r in s.records) for s in summaries]
    if any(s != steps[0] for s in steps):
        raise AlignmentError("runs do not share the same checkpoint steps")
    if metric not in {f.name for f in dataclasses.fields(diag.MetricsRecord)} - {"env_step"}:
        raise InputError(f"unknown metric {metric!r}")
    table = []
    for i, step in enumerate(steps[0]):
        vals = [getattr(s.records[i], metric) for s in summaries]
        vals = [v for v in vals if v is not None]
        if not vals:
            continue
        table.append({"env_step": step, "iqm": diag.iqm(vals), "min": min(vals), "max": max(vals),
                      "n_runs": len(vals)})
    profile = []
    if steps[0]:
        final = [getattr(s.records[-1], metric) for s in summaries]
        final = [v for v in final if v is not None]
        if final:
            lo, hi = min(final), max(final)
            grid = np.linspace(lo, hi, n_thresholds) if hi > lo else np.array([lo])
            fracs = diag.performance_profile(final, grid)
            profile = [{"threshold": float(t), "fraction": f} for t, f in zip(grid, fracs)]
    return table, profile


def fig2_points(run_dirs, early_step: int | None = None) -> list[dict]:
    """Cost-adjustment ratio vs final-window reward, one row per run."""
    rows = []
    for d in sorted(str(x) for x in run_dirs):
        cfg = read_config(d)
        summary = read_metrics(d)
        es = cfg.early_step if early_step is None else early_step
        try:
            ratio = diag.cost_adjustment_ratio(summary, es)
        except InputError:
            ratio = math.nan
        rows.append({
            "run": d, "algorithm": cfg.algorithm, "penalty_weight": cfg.effective_penalty,
            "cost_adjustment_ratio": ratio, "ratio_defined": math.isfinite(ratio),
            "final_reward": summary.final("episode_reward"),
            "final_incentive": summary.final("episode_incentive"),
            "final_cost": summary.final("episode_cost"),
        })
    return rows


def write_rows(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: _csv(v) if isinstance(v, float) else v for k, v in row.items()})


def suggest_cost_limit(final_window_cost: float) -> float:
    """Half the final-window episode cost of a cost-unaware agent."""
    m = 0.5 * final_window_cost
    if not m > 0:
        raise ConfigError(f"suggested cost limit {m} is not positive; the environment produces no cost")
    return m


def reference_cost_run(cfg: ExperimentConfig, seed: int, out_dir=None) -> float:
    """Train a penalty-free OPAC2 agent on ``cfg.env`` and return half its final cost."""
    if cfg.env != "nav_mixed":
        raise ConfigError("reference cost runs need the nav_mixed environment")
    ref = dataclasses.replace(cfg, algorithm="opac2", penalty_weight=0.0, penalty_preset=None,
                              agent=dataclasses.replace(cfg.agent, cost_limit=None),
                              env_overrides={k: v for k, v in cfg.env_overrides.items()
                                             if k not in ("penalty_weight", "constrained")})
    summary = run_experiment(ref, seed, out_dir)
    return suggest_cost_limit(summary.final("episode_cost"))


def evaluate(checkpoint, episodes: int = 5, seed: int = 0, deterministic: bool = False) -> dict:
    """Roll out a saved agent on fresh episodes of its environment."""
    agent, cfg, _ = load_agent(checkpoint)
    rngs = RngFactory(seed)
    env, _ = build_envs(cfg, RngFactory(seed + 10_007))
    rng = rngs.get("evaluate")
    totals = {"reward": [], "incentive": [], "cost": []}
    for _ in range(episodes):
        obs = env.reset()
        acc = {"reward": 0.0, "incentive": 0.0, "cost": 0.0}
        while True:
            if deterministic:
                action = _deterministic(agent, obs)
            else:
                action = agent.act_eval(obs, rng)
            res = env.step(action)
            acc["reward"] += res.reward
            acc["incentive"] += res.incentive
            acc["cost"] += res.cost
            obs = res.obs
            if res.done:
                break
        for k in totals:
            totals[k].append(acc[k])
    return {f"mean_episode_{k}": float(np.mean(v)) for k, v in totals.items()} | {"episodes": episodes}


def _deterministic(agent, obs):
    if hasattr(agent, "actor"):
        return agent.actor.act(obs)
    head, _ = agent.policy.head(obs)
    return np.tanh(head.mean)


def diagnose(checkpoint, episodes: int = 5, seed: int = 0) -> dict:
    """Validation TD error and Q-estimation error of a saved agent on fresh held-out episodes."""
    agent, cfg, _ = load_agent(checkpoint)
    rngs = RngFactory(seed)
    env, _ = build_envs(cfg, RngFactory(seed + 20_011))
    val = collect_validation(env, agent, episodes, rngs.get("diagnose_act"))
    td = diag.validation_td_error(agent, val, rngs.get("diagnose"))
    qe = diag.q_estimation_error(agent, val, cfg.agent.gamma)
    out = {f"td_error_{k}": v for k, v in td.items()}
    out.update({f"q_error_{k}": v for k, v in qe.items()})
    out["transitions"] = len(val)
    return out
