"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

import conftest
from rsaware import metrics, models
from rsaware.awareness import check_complete, check_weak_necessary, construct_uci_mixer
from rsaware.experiment import default_config, run_matrix
from rsaware.fuzz import run_fuzz
from rsaware.logic import Program, program_from_text
from rsaware.shortcuts import (
    MixtureSpec,
    Remapping,
    Support,
    enumerate_remappings,
    identity_remapping,
    mixture_remap_distribution,
    product_distribution,
)
from rsaware.synthtask import SceneSpec, generate_dataset
from rsaware.trainer import MLPSpec, grad_check, init_model

XOR = "(c1 & !c2) | (!c1 & c2)"
NAND = "!c1 | !c2"


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _first_bit_setup():
    p = program_from_text("c1", 2)
    s = Support.full(2)
    flip = Remapping({g: (g[0], 1 - g[1]) for g in s}, p, s)
    return p, s, [identity_remapping(p, s), flip]


def test_criterion_1_disentangled_shortcuts():
    start = time.perf_counter()
    s = Support.full(2)
    xor, nand = program_from_text(XOR, 2), program_from_text(NAND, 2)
    swap = Remapping({g: (1 - g[0], 1 - g[1]) for g in s}, xor, s)
    got_xor = set(enumerate_remappings(xor, s, "disentangled"))
    got_nand = set(enumerate_remappings(nand, s, "disentangled"))
    elapsed = time.perf_counter() - start
    ok = got_xor == {identity_remapping(xor, s), swap} and got_nand == {identity_remapping(nand, s)} and elapsed < 1
    report(1, "XOR -> {identity, swap}, Traffic Lights -> {identity}", ok, f"{elapsed * 1e3:.1f} ms")


def test_criterion_2_theorem_checkers():
    start = time.perf_counter()
    s = Support.full(2)
    xor = program_from_text(XOR, 2)
    xor_mix = [identity_remapping(xor, s), Remapping({g: (1 - g[0], 1 - g[1]) for g in s}, xor, s)]
    p, s, first_bit_mix = _first_bit_setup()
    verdicts = (
        check_weak_necessary(xor, s, xor_mix).verdict_weak_necessary,
        check_weak_necessary(p, s, first_bit_mix).verdict_weak_necessary,
        check_complete(p, s, first_bit_mix).verdict_complete,
        check_complete(xor, s, xor_mix).verdict_complete,
    )
    elapsed = time.perf_counter() - start
    ok = verdicts == (False, True, True, False) and elapsed < 1
    report(2, "weak/complete verdicts for XOR and beta=c1", ok, f"verdicts {verdicts}, {elapsed * 1e3:.1f} ms")


def test_criterion_3_constructed_marginals_exact():
    p, s, rems = _first_bit_setup()
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(50):
        a = Fraction(float(rng.uniform(1e-6, 1 - 1e-6)))
        m = MixtureSpec(rems, (a, 1 - a))
        for g in s:
            if product_distribution(construct_uci_mixer(m, g)) != mixture_remap_distribution(m, g):
                mismatches += 1
    report(3, "constructed factorized table equals the mixture exactly", mismatches == 0,
           f"50 weights x 4 concepts, {mismatches} mismatches")


def test_criterion_4_theorem_fuzzing():
    start = time.perf_counter()
    summary = run_fuzz(n_instances=300, seed=0, trials=25)
    elapsed = time.perf_counter() - start
    ok = summary.instances >= 200 and summary.ok and elapsed < 60
    report(4, "checker verdicts never contradict the factorizability oracle", ok,
           f"{summary.instances} instances, {len(summary.contradictions)} contradictions, {elapsed:.1f} s")


def _fd_rel(f, raw, analytic, h=1e-5):
    worst = 0.0
    for i in range(raw.size):
        up, down = raw.copy(), raw.copy()
        up[i] += h
        down[i] -= h
        numeric = (f(up) - f(down)) / (2 * h)
        worst = max(worst, abs(numeric - analytic[i]) / max(abs(numeric), abs(analytic[i]), 1e-6))
    return worst


def test_criterion_5_loss_correctness():
    rng = np.random.default_rng(5)
    kinds = ("independent", "joint", "ar")
    worst_form = 0.0
    worst_grad = 0.0
    for i in range(1000):
        kind = kinds[i % 3]
        k = int(rng.integers(1, 4))
        table = rng.integers(0, 2, size=2**k)
        table[rng.integers(1, 2**k)] = 1 - table[0]  # both labels occur
        p = Program(k, 2, tuple(int(v) for v in table))
        raw = rng.normal(scale=1.5, size=models.n_params(kind, k))
        y = int(rng.integers(2))
        posterior = models.label_posterior(models.joint_table(raw, kind), p)[y]
        worst_form = max(worst_form, abs(models.semantic_nll(raw, kind, p, y).value + math.log(posterior)))
        if i < 300:
            for fn in (models.semantic_nll, models.uniform_kl):
                grad = fn(raw, kind, p, y).grad
                worst_grad = max(worst_grad, _fd_rel(lambda r: fn(r, kind, p, y).value, raw, grad))

    xor = program_from_text(XOR, 2)
    data = generate_dataset(SceneSpec(), xor, Support.full(2), 32, seed=1)
    worst_net = 0.0
    for kind in kinds:
        for loss in ("semantic", "uniform_kl"):
            model = init_model(MLPSpec(16, 2, kind, hidden_dims=(16, 16)), seed=3)
            worst_net = max(worst_net, grad_check(model, data.x, data.y, xor, loss, n_weights=200))
    ok = worst_form <= 1e-12 and worst_grad <= 1e-4 and worst_net <= 1e-4
    report(5, "semantic loss forms agree; analytic and backprop gradients match differences", ok,
           f"form gap {worst_form:.1e}, loss grad rel {worst_grad:.1e}, network rel {worst_net:.1e}")


def test_criterion_6_independent_kl_collapse():
    xor = program_from_text(XOR, 2)
    rng = np.random.default_rng(6)
    worst_mu = worst_loss = 0.0
    for start in range(100):
        z = rng.normal(scale=3.0, size=2)
        # the data mixes both labels; the stationary point is shared
        ys = [0, 1] if start % 3 == 0 else [start % 3 - 1]
        for _ in range(300):
            values, grads = models.batch_loss(np.tile(z, (len(ys), 1)), "independent", xor, ys, "uniform_kl")
            z = z - 2.0 * grads.mean(axis=0)
        mu = models.sigmoid(z)
        worst_mu = max(worst_mu, float(np.max(np.abs(mu - 0.5))))
        worst_loss = max(worst_loss, abs(float(values.mean()) - math.log(2)))
    ok = worst_mu <= 1e-3 and worst_loss <= 1e-6
    report(6, "independent uniform-KL on XOR collapses to marginals 0.5 at loss log 2", ok,
           f"100 starts, max |mu-0.5| {worst_mu:.1e}, max |loss-log2| {worst_loss:.1e}")


@pytest.fixture(scope="module")
def matrix():
    cfg = default_config()
    start = time.perf_counter()
    results = run_matrix(cfg)
    return cfg, results, time.perf_counter() - start


def _finals(results, task, kind, loss):
    return [r.history for r in results if (r.task, r.kind, r.loss) == (task, kind, loss)]


@pytest.mark.slow
def test_criterion_7_training_phenomenology(matrix):
    cfg, results, elapsed = matrix
    failed = [r.run_id for r in results if r.error]
    checks = {}

    runs = _finals(results, "xor", "independent", "semantic")
    acc_y = [h.final.acc_y for h in runs]
    acc_w = [h.final.acc_w for h in runs]
    shortcut = sum(a <= 5 for a in acc_w)
    grounded = sum(a >= 95 for a in acc_w)
    checks["a"] = (
        len(runs) == 20 and min(acc_y) >= 99 and shortcut + grounded == 20 and shortcut >= 1 and grounded >= 1,
        f"min Acc_y {min(acc_y):.2f}, {shortcut} shortcut / {grounded} grounded",
    )

    runs = _finals(results, "xor", "joint", "uniform_kl")
    mean_acc_y = np.mean([h.final.acc_y for h in runs])
    mean_ece = np.mean([h.final.ece_w for h in runs])
    differ = [
        float(np.max(np.abs(h.final.probe_tables[i, 1:3] - 0.5)))
        for h in runs for i, g in enumerate(h.probe_concepts) if g[0] != g[1]
    ]
    checks["b"] = (
        mean_acc_y >= 99 and mean_ece <= 15 and max(differ) <= 0.1,
        f"Acc_y {mean_acc_y:.2f}, ECE_w {mean_ece:.2f}, max probe |p-0.5| on (0,1)/(1,0) {max(differ):.3f}",
    )

    runs = _finals(results, "xor", "independent", "uniform_kl")
    mean_acc_y = np.mean([h.final.acc_y for h in runs])
    # epoch 0 is the untrained network; the contract concerns what training produces
    marg_dev = max(
        float(np.max(np.abs(models.bit_marginals(e.probe_tables) - 0.5)))
        for h in runs for e in h.entries if e.epoch > 0
    )
    checks["c"] = (45 <= mean_acc_y <= 55 and marg_dev <= 0.05, f"Acc_y {mean_acc_y:.2f}, max probe |mu-0.5| {marg_dev:.3f}")

    tl = {combo: _finals(results, "traffic_lights", *combo)
          for combo in [("independent", "semantic"), ("ar", "semantic"), ("joint", "semantic")]}
    ind_w = np.mean([h.final.acc_w for h in tl[("independent", "semantic")]])
    ar_w = np.mean([h.final.acc_w for h in tl[("ar", "semantic")]])
    joint_w = np.mean([h.final.acc_w for h in tl[("joint", "semantic")]])
    joint_y = np.mean([h.final.acc_y for h in tl[("joint", "semantic")]])
    checks["tl"] = (
        ind_w >= 95 and ar_w >= 95 and joint_w <= 90 and joint_y >= 99,
        f"ind Acc_w {ind_w:.2f}, ar Acc_w {ar_w:.2f}, joint Acc_w {joint_w:.2f} / Acc_y {joint_y:.2f}",
    )
    checks["runtime"] = (elapsed < 600 and not failed, f"{len(results)} runs in {elapsed:.0f} s, {len(failed)} aborted")

    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{key}: {'ok' if v[0] else 'FAILED'} {v[1]}" for key, v in checks.items())
    report(7, "training phenomenology over 20 seeds", ok, detail)


def test_criterion_8_ece_suite():
    def stream(probs, truth):
        probs = np.asarray(probs, dtype=float).reshape(-1, 1)
        return metrics.EvalRecords(np.zeros(len(probs)), np.zeros(len(probs)), probs, np.asarray(truth).reshape(-1, 1))

    examples = (
        metrics.ece(stream([1.0, 0.0, 1.0, 0.0], [1, 0, 1, 0])),
        metrics.ece(stream([0.5] * 10, [0, 1] * 5)),
        metrics.ece(stream([0.9] * 10, [1, 0] * 5)),
    )
    examples_ok = (
        examples[0] == 0.0 and examples[1] == 0.0 and abs(examples[2] - 40.0) <= 1e-12
    )
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n = 10**5
        conf = rng.uniform(0.5, 1.0, size=n)
        probs = np.where(rng.random(n) < 0.5, conf, 1 - conf)
        predicted = (probs > 0.5).astype(int)
        truth = np.where(rng.random(n) < conf, predicted, 1 - predicted)
        worst = max(worst, metrics.ece(stream(probs, truth), 10))
    report(8, "ECE worked examples and calibrated stream", examples_ok and worst <= 1.5,
           f"examples {[round(e, 10) for e in examples]}, worst calibrated ECE {worst:.3f}")
