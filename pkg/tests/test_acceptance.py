"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they pass.  Every tolerance and runtime budget is pinned here; when a
criterion fails, its line reports the measured offender before the
assertion fires.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from corners_lab.bohr import (
    BohrSpec,
    attendant,
    bohr_members,
    bohr_size,
    check_regular,
    conv_support_stats,
    find_regular_epsilon,
    member_indices,
    size_at_radius,
)
from corners_lab.corners import (
    Subset2D,
    ap3_free,
    behrend_set,
    cornerfree_from_ap3free,
    count_corners,
    extremal_search,
    green_symmetrize,
)
from corners_lab.errors import PreconditionError
from corners_lab.groups import GroupSpec
from corners_lab.increment import (
    ConstantsConfig,
    build_family,
    fourier_increment,
    index,
    iteration_driver,
    nonuniform_increment,
    paley_set,
)
from corners_lab.bohr import local_density_table_2d
from corners_lab.spectral import DenseMap, balanced2d, convolve, dft
from corners_lab.uniformity import box_norm, box_norm4, box_norm4_pairform, intermediate_omegas

REL_TOL = 1e-9
ABS_FLOOR = 1e-12


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number:02d} {name}: {'PASS' if ok else 'FAIL'} - {detail}")


def rel_err(lhs, rhs) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), ABS_FLOOR)


def test_01_spectral_identities():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for name in ("Z8", "Z12", "Z5xZ5", "Z101"):
        g = GroupSpec.parse(name)
        for _ in range(100):
            f = DenseMap(g, rng.normal(size=g.N) + 1j * rng.normal(size=g.N))
            h = DenseMap(g, rng.normal(size=g.N) + 1j * rng.normal(size=g.N))
            fh, hh = dft(f), dft(h)
            worst = max(worst, rel_err(f.l2_norm_sq(), fh.l2_norm_sq() / g.N))
            inner_lhs = complex(np.sum(f.values * np.conj(h.values)))
            inner_rhs = complex(np.sum(fh.values * np.conj(hh.values)) / g.N)
            worst = max(worst, abs(inner_lhs - inner_rhs) / max(abs(inner_lhs), ABS_FLOOR))
            conv_energy = float(np.sum(np.abs(convolve(f, h).values) ** 2))
            spec_energy = float(np.sum((np.abs(fh.values) * np.abs(hh.values)) ** 2) / g.N)
            worst = max(worst, rel_err(conv_energy, spec_energy))
    elapsed = time.perf_counter() - start
    ok = worst < REL_TOL and elapsed < 10.0
    verdict(1, "spectral-identities", ok, f"worst relative error {worst:.2e}, {elapsed:.1f}s")
    assert worst < REL_TOL
    assert elapsed < 10.0


def test_02_box_norm_coherence():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for name in ("Z8", "Z12", "Z2xZ5"):
        g = GroupSpec.parse(name)
        assert g.N <= 12
        for _ in range(100):
            F = rng.normal(size=(g.N, g.N)) + 1j * rng.normal(size=(g.N, g.N))
            worst = max(worst, rel_err(box_norm4(F), box_norm4_pairform(F)))
    triangle_slack = 0.0
    for _ in range(200):
        F = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        G = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        triangle_slack = max(triangle_slack, box_norm(F + G) - box_norm(F) - box_norm(G))
    elapsed = time.perf_counter() - start
    ok = worst < REL_TOL and triangle_slack < REL_TOL and elapsed < 30.0
    verdict(2, "box-norm-coherence", ok,
            f"form gap {worst:.2e}, triangle slack {triangle_slack:.2e}, {elapsed:.1f}s")
    assert worst < REL_TOL
    assert triangle_slack < REL_TOL
    assert elapsed < 30.0


def _bohr_roster():
    return [
        ("Z100", [[1]], Fraction(1, 7)),
        ("Z100", [[1], [7]], Fraction(9, 40)),
        ("Z101", [[1]], Fraction(1, 20)),
        ("Z101", [[1], [10], [31]], Fraction(2, 5)),
        ("Z1009", [[1], [37]], Fraction(1, 9)),
        ("Z9973", [[1]], Fraction(1, 15)),
        ("Z9973", [[1], [501], [2222]], Fraction(3, 10)),
        ("Z7xZ11", [[1, 0], [0, 1]], Fraction(2, 5)),
        ("Z5xZ5", [[2, 3]], Fraction(27, 100)),
        ("Z6xZ4", [[1, 2], [3, 1]], Fraction(1, 5)),
    ]


def test_03_bohr_machinery():
    start = time.perf_counter()
    failures = []
    # (a) size lower bound, exact
    for name, charsets, eps in _bohr_roster():
        g = GroupSpec.parse(name)
        chars = tuple(g.character(c) for c in charsets)
        assert len(chars) <= 3 and g.N <= 10**4
        spec = BohrSpec(g, chars, eps)
        if Fraction(bohr_size(spec)) < eps ** len(chars) * g.N:
            failures.append(f"size bound {name}")
    # (b) regular radius search with the exact endpoint re-check
    for name, charsets, eps in _bohr_roster():
        g = GroupSpec.parse(name)
        chars = tuple(g.character(c) for c in charsets)
        for kappa in (Fraction(1, 8), Fraction(1, 2)):
            eps1 = find_regular_epsilon(g, chars, eps, kappa)
            spec = BohrSpec(g, chars, eps1, kappa)
            if not (eps / 2 < eps1 < eps):
                failures.append(f"eps1 range {name}")
            size = bohr_size(spec)
            lo = size_at_radius(spec, eps1 - spec.window)
            hi = size_at_radius(spec, eps1 + spec.window)
            if not ((1 - kappa) * size < lo and hi < (1 + kappa) * size):
                failures.append(f"endpoint check {name}")
    # (c) the three convolution-support conclusions on 50 generated pairs
    pairs = 0
    for name, charsets, eps in _bohr_roster():
        g = GroupSpec.parse(name)
        chars = tuple(g.character(c) for c in charsets)
        for kappa in (Fraction(1, 8), Fraction(1, 2), Fraction(7, 8)):
            if pairs >= 50:
                break
            eps1 = find_regular_epsilon(g, chars, eps, kappa)
            lam = BohrSpec(g, chars, eps1, kappa)
            att = attendant(lam, lam.kappa / (100 * lam.effective_d))
            stats = conv_support_stats(lam, att)
            pairs += 1
            if not (stats.support_bound_ok and stats.full_bound_ok and stats.defect_bound_ok):
                failures.append(f"conv bounds {name} kappa={kappa}")
    # top up to exactly 50 pairs with varied radii on two groups
    g = GroupSpec([1009])
    c = (g.character((1,)),)
    num = 30
    while pairs < 50:
        eps = Fraction(num, 100)
        eps1 = find_regular_epsilon(g, c, eps, Fraction(1, 2))
        lam = BohrSpec(g, c, eps1, Fraction(1, 2))
        att = attendant(lam, lam.kappa / 100)
        stats = conv_support_stats(lam, att)
        if not (stats.support_bound_ok and stats.full_bound_ok and stats.defect_bound_ok):
            failures.append(f"conv bounds Z1009 eps={eps}")
        pairs += 1
        num += 2
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60.0
    verdict(3, "bohr-machinery", ok, f"{pairs} attendant pairs, failures={failures or 'none'}, {elapsed:.1f}s")
    assert not failures
    assert elapsed < 60.0


def test_04_corner_statistics():
    start = time.perf_counter()
    g = GroupSpec([101])
    N = 101
    lines = []
    for delta in (0.2, 0.5):
        counts = np.array(
            [count_corners(Subset2D.random(g, delta, seed=1000 + s)) for s in range(50)],
            dtype=float,
        )
        expected = delta**3 * N * N * (N - 1)
        se = counts.std(ddof=1) / np.sqrt(50)
        dev = abs(counts.mean() - expected) / se
        lines.append((delta, dev))
    elapsed = time.perf_counter() - start
    ok = all(dev <= 5 for _, dev in lines) and elapsed < 60.0
    verdict(4, "corner-statistics", ok,
            ", ".join(f"delta={d}: {v:.2f} SE" for d, v in lines) + f", {elapsed:.1f}s")
    for _, dev in lines:
        assert dev <= 5
    assert elapsed < 60.0


def test_05_extremal_oracle():
    start = time.perf_counter()
    failures = []
    res2 = extremal_search(2, "grid")
    if res2.max_size != 3:
        failures.append(f"L(2)*4 = {res2.max_size}")
    stable = {}
    for n in (3, 4):
        first = extremal_search(n, "grid")
        second = extremal_search(n, "grid")
        stable[n] = first.max_size
        if not (first.optimal and second.optimal and first.max_size == second.max_size):
            failures.append(f"instability at n={n}")
        if not np.array_equal(first.witness.bits, second.witness.bits):
            failures.append(f"witness drift at n={n}")
        if count_corners(first.witness) != 0:
            failures.append(f"witness has corners at n={n}")
    if count_corners(res2.witness) != 0:
        failures.append("witness has corners at n=2")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120.0
    verdict(5, "extremal-oracle", ok, f"optima n=2..4: 3,{stable[3]},{stable[4]}, {elapsed:.1f}s")
    assert not failures
    assert elapsed < 120.0


def _random_ap3_free(N: int, seed: int) -> list[int]:
    """Greedy progression-free subset of (-N, N) from seeded candidates."""
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    for v in rng.permutation(np.arange(-(N - 1), N)):
        if ap3_free(chosen + [int(v)]):
            chosen.append(int(v))
        if len(chosen) >= 6:
            break
    return chosen


def test_06_constructions():
    start = time.perf_counter()
    failures = []
    for n in (1, 10, 100, 1000, 10000):
        B = behrend_set(n)
        if not ap3_free(B):
            failures.append(f"behrend({n}) has a progression")
        if not all(1 <= int(b) <= n for b in B):
            failures.append(f"behrend({n}) out of range")
    for n in (10, 25, 50):
        B = [int(b) - 1 for b in behrend_set(n)]
        A = cornerfree_from_ap3free(B, n, "grid")
        if count_corners(A, "nonzero") != 0:
            failures.append(f"lift has corners at n={n}")
    checked = 0
    for seed in range(40):
        if checked >= 20:
            break
        N = 5 + seed % 11  # N <= 15
        side = 2 * N + 1
        B = _random_ap3_free(N, seed)
        if not B:
            continue
        lifted = cornerfree_from_ap3free(B, side, "grid")
        rng = np.random.default_rng(seed)
        bits = lifted.bits & (rng.random((side, side)) < 0.7)
        A = Subset2D("grid", bits)
        if A.cardinality == 0 or count_corners(A, "positive") != 0:
            continue
        out = green_symmetrize(A, N)
        checked += 1
        if not np.all(out.bits <= A.bits):
            failures.append(f"not a subset at seed={seed}")
        if count_corners(out, "nonzero") != 0:
            failures.append(f"corner after symmetrization at seed={seed}")
        delta = A.cardinality / side**2
        if out.cardinality < delta**2 * side**2 / 4:
            failures.append(f"size bound violated at seed={seed}")
    elapsed = time.perf_counter() - start
    ok = not failures and checked >= 20
    verdict(6, "constructions", ok, f"{checked} symmetrization inputs, failures={failures or 'none'}, {elapsed:.1f}s")
    assert checked >= 20
    assert not failures


def test_07_increment_correctness():
    start = time.perf_counter()
    failures = []
    planted = 0
    seed = 0
    while planted < 20 and seed < 60:
        seed += 1
        rng = np.random.default_rng(seed)
        n = (12, 14, 16)[seed % 3]
        d1 = n // 2 + seed % 3
        d2 = n // 2
        noise = (0.0, 0.05, 0.1)[seed % 3]
        bits = np.zeros((n, n), bool)
        bits[:d1, :d2] = True
        bits |= rng.random((n, n)) < noise
        E = np.ones(n, bool)
        delta = Fraction(int(bits.sum()), n * n)
        alpha = delta**4 / 8  # exact, so the precondition cap cannot round
        f = balanced2d(bits, E, E)
        if box_norm4(f) < alpha * (n**4):
            continue  # not a usable plant; keep scanning seeds
        planted += 1
        res = nonuniform_increment(bits, E, E, alpha)
        F1, F2 = res.F1, res.F2
        f1, f2 = int(F1.sum()), int(F2.sum())
        hits = int(bits[np.ix_(F1, F2)].sum())
        floor = min(alpha**2 / delta**5, alpha / delta**2) / 2**15
        if not Fraction(hits, f1 * f2) > delta + floor:
            failures.append(f"density conclusion fails at seed={seed}")
        if not (Fraction(f1) >= floor * n and Fraction(f2) >= floor * n):
            failures.append(f"size conclusion fails at seed={seed}")
    uniform_rejections = 0
    seed = 100
    while uniform_rejections < 20 and seed < 200:
        seed += 1
        rng = np.random.default_rng(seed)
        bits = rng.random((16, 16)) < 0.65
        E = np.ones(16, bool)
        delta = Fraction(int(bits.sum()), 256)
        alpha = float(delta**4 / 8)
        f = balanced2d(bits, E, E)
        if box_norm4(f) >= alpha * 16**4:
            continue  # not rectilinearly uniform; skip
        try:
            nonuniform_increment(bits, E, E, alpha)
            failures.append(f"uniform instance accepted at seed={seed}")
        except PreconditionError:
            uniform_rejections += 1
    elapsed = time.perf_counter() - start
    ok = not failures and planted == 20 and uniform_rejections == 20 and elapsed < 120.0
    verdict(7, "increment-correctness", ok,
            f"{planted} planted, {uniform_rejections} uniform rejections, failures={failures or 'none'}, {elapsed:.1f}s")
    assert planted == 20 and uniform_rejections == 20
    assert not failures
    assert elapsed < 120.0


def test_08_fourier_increment():
    start = time.perf_counter()
    g = GroupSpec([1009])
    lam = BohrSpec(g, (), Fraction(1), Fraction(1, 8))
    alpha = 0.25
    failures = []
    chars = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)
    for coeff in chars:
        r = (coeff * np.arange(g.N)) % g.N
        Q = np.minimum(r, g.N - r) < g.N / 4
        res = fourier_increment(Q, lam, alpha, alpha / 32)
        if res.new_spec.d != lam.d + 1:
            failures.append(f"dimension at char {coeff}")
        members = member_indices(res.new_spec)
        delta = Q.sum() / g.N
        mean_sq = float(np.mean([(np.mean(Q[(members + n) % g.N]) - delta) ** 2 for n in range(g.N)]))
        if mean_sq < alpha**2 / 4:
            failures.append(f"mean-square bound at char {coeff}: {mean_sq:.4g}")
        if rel_err(mean_sq, res.mean_sq_dev) > 1e-9:
            failures.append(f"enumeration mismatch at char {coeff}")
    elapsed = time.perf_counter() - start
    ok = not failures
    verdict(8, "fourier-increment", ok, f"{len(chars)} planted sets, failures={failures or 'none'}, {elapsed:.1f}s")
    assert not failures


def test_09_lemma_oracles():
    start = time.perf_counter()
    failures = []
    # Paley level sets: 100 random mean-zero functions per exponent.
    rng = np.random.default_rng(909)
    for p in (1.5, 2.0, 3.0):
        for _ in range(100):
            raw = rng.uniform(-1, 1, size=128)
            Z = raw - raw.mean()
            Z /= max(1.0, np.abs(Z).max())
            if not paley_set(Z, p).ok:
                failures.append(f"paley p={p}")
    # Nested index bound on 10 families of depth <= 2.
    fam_count = 0
    for name, eps, kappa, depth in (
        ("Z100", Fraction(2, 5), Fraction(1, 2), 1),
        ("Z100", Fraction(2, 5), Fraction(1, 2), 2),
        ("Z100", Fraction(1, 4), Fraction(1, 8), 1),
        ("Z60", Fraction(1, 3), Fraction(1, 2), 2),
        ("Z60", Fraction(1, 2), Fraction(1, 4), 1),
        ("Z7xZ11", Fraction(2, 5), Fraction(1, 2), 2),
        ("Z101", Fraction(1, 3), Fraction(1, 2), 1),
        ("Z1009", Fraction(1, 3), Fraction(1, 2), 1),
        ("Z1009", Fraction(2, 5), Fraction(7, 8), 2),
        ("Z101", Fraction(1, 2), Fraction(1, 8), 2),
    ):
        g = GroupSpec.parse(name)
        c = (g.character_by_index(1),)
        base = BohrSpec(g, c, find_regular_epsilon(g, c, eps, kappa), kappa)
        family = build_family(base, depth)
        family.validate()
        lam_mask = bohr_members(base)
        Q = np.outer(lam_mask, lam_mask) & (np.random.default_rng(fam_count).random((g.N, g.N)) < 0.45)
        delta = Q.sum() / bohr_size(base) ** 2
        for k in range(depth + 1):
            spec_k = family.attendant_spec(k)
            table = local_density_table_2d(Q, spec_k) / bohr_size(spec_k) ** 2
            ind = index(family, table, k)
            if abs(ind - delta) > float(4 * kappa * (k + 1)) + 1e-9:
                failures.append(f"index bound {name} depth {depth} level {k}")
        fam_count += 1
    # Two-scale exception sets on 10 planted triples.
    triples = 0
    fired1 = fired2 = fired3 = 0
    g = GroupSpec([101])
    lam = BohrSpec(g, (), Fraction(1), Fraction(1, 8))
    c = (g.character((1,)),)
    for i, (eps_p, eps_att, alpha) in enumerate(
        [
            (Fraction(1, 5), Fraction(3, 20), 0.5),
            (Fraction(1, 4), Fraction(1, 5), 0.5),
            (Fraction(3, 10), Fraction(1, 10), 0.6),
            (Fraction(1, 5), Fraction(3, 20), 0.7),
            (Fraction(2, 5), Fraction(1, 10), 0.5),
            (Fraction(1, 4), Fraction(1, 4), 0.6),
            (Fraction(3, 10), Fraction(3, 20), 0.7),
            (Fraction(1, 5), Fraction(1, 5), 0.6),
            (Fraction(2, 5), Fraction(3, 20), 0.5),
            (Fraction(1, 4), Fraction(3, 10), 0.7),
        ]
    ):
        lamp = BohrSpec(g, c, find_regular_epsilon(g, c, eps_p), Fraction(1, 8))
        lampp = attendant(lamp, eps_att)
        Q = np.random.default_rng(300 + i).random(g.N) < 0.5
        rep = intermediate_omegas(Q, lam, lamp, lampp, alpha)
        triples += 1
        if rep.hypothesis_mean_sq <= alpha**2:
            fired1 += 1
            if not rep.part1_ok:
                failures.append(f"omega1 bound at triple {i}")
        if rep.hypothesis_bad_count <= alpha * rep.lam_size:
            fired2 += 1
            if not rep.part2_ok:
                failures.append(f"omega2 bound at triple {i}")
        from corners_lab.uniformity import ae_uniformity

        if ae_uniformity(Q & bohr_members(lam), lam, lampp, alpha).uniform:
            fired3 += 1
            if not rep.part3_ok:
                failures.append(f"omega-tilde bound at triple {i}")
    elapsed = time.perf_counter() - start
    ok = not failures and triples == 10 and min(fired1, fired2, fired3) >= 5
    verdict(9, "lemma-oracles", ok,
            f"paley 300 ok, {fam_count} families, {triples} triples "
            f"(hypotheses fired {fired1}/{fired2}/{fired3}), failures={failures or 'none'}, {elapsed:.1f}s")
    assert not failures
    assert triples == 10
    assert min(fired1, fired2, fired3) >= 5  # the lemma hypotheses genuinely fired


def test_10_driver():
    start = time.perf_counter()
    failures = []
    # (a) the full plane stops at step 0 with the exact corner count
    g = GroupSpec([11])
    trace = iteration_driver(Subset2D.full(g), ConstantsConfig(max_steps=3))
    if trace.steps[0].verdict != "corner-count":
        failures.append("full plane did not stop uniform")
    if trace.steps[0].detail["corners_found"] != 11 * 11 * 10:
        failures.append("full plane corner count")
    # (b) the corner-free grid lift never yields a positive corner verdict
    B = [int(b) - 1 for b in behrend_set(8)]
    A = cornerfree_from_ap3free(B, 8, "grid")
    trace_b = iteration_driver(A, ConstantsConfig(max_steps=8))
    if any(s.detail.get("corners_found", 0) > 0 for s in trace_b.steps):
        failures.append("behrend run claimed a corner")
    # (c) planted instances increase density strictly across increments
    for seed in (4, 5, 6):
        rng = np.random.default_rng(seed)
        bits = np.zeros((16, 16), bool)
        bits[:8, :8] = True
        bits |= rng.random((16, 16)) < 0.05
        trace_p = iteration_driver(Subset2D("grid", bits), ConstantsConfig(max_steps=6))
        deltas = [s.delta for s in trace_p.steps if s.verdict.endswith("-increment")]
        if not deltas:
            failures.append(f"no increments at seed={seed}")
        start_delta = bits.sum() / 256
        seq = [start_delta] + deltas
        if any(b <= a for a, b in zip(seq, seq[1:])):
            failures.append(f"non-increasing densities at seed={seed}")
    elapsed = time.perf_counter() - start
    ok = not failures
    verdict(10, "driver", ok, f"failures={failures or 'none'}, {elapsed:.1f}s")
    assert not failures
