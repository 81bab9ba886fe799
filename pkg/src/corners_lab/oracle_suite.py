"""Batch runner for the module-level brute-force oracle checks.

Each check recomputes an identity or bound two independent ways and
reports the measured discrepancy next to its tolerance, as machine
readable pass/fail rows.  A tolerance of zero makes the floating-point
identity checks fail by design (negative control).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from corners_lab import bohr as bohr_mod
from corners_lab.bohr import BohrSpec, attendant, bohr_size, check_regular, conv_support_stats, find_regular_epsilon
from corners_lab.groups import GroupSpec
from corners_lab.increment import paley_set
from corners_lab.rng import SplitMix64
from corners_lab.spectral import DenseMap, convolve, dft
from corners_lab.uniformity import box_norm4, box_norm4_pairform

DEFAULT_CONFIG = {
    "groups": ["Z8", "Z12", "Z5xZ5"],
    "functions_per_group": 20,
    "tolerance": 1e-9,
    "seed": 1,
}


def _random_map(group: GroupSpec, gen: SplitMix64) -> DenseMap:
    values = np.array(
        [complex(2 * gen.next_double() - 1, 2 * gen.next_double() - 1) for _ in range(group.N)]
    )
    return DenseMap(group, values)


def _rel_err(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs), 1e-12)
    return abs(lhs - rhs) / scale


def run_suite(config: dict | None = None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if config:
        cfg.update(config)
    tol = float(cfg["tolerance"])
    reps = int(cfg["functions_per_group"])
    gen = SplitMix64(int(cfg["seed"]))
    checks: list[dict] = []

    def add(name: str, group: str | None, measured: float, bound: float, ok: bool | None = None):
        checks.append(
            {
                "name": name,
                "group": group,
                "measured": float(measured),
                "bound": float(bound),
                "pass": bool(measured <= bound) if ok is None else bool(ok),
            }
        )

    for gname in cfg["groups"]:
        group = GroupSpec.parse(gname)
        worst_par = worst_inner = worst_conv = 0.0
        for _ in range(reps):
            f = _random_map(group, gen)
            g = _random_map(group, gen)
            fh, gh = dft(f), dft(g)
            worst_par = max(worst_par, _rel_err(f.l2_norm_sq(), fh.l2_norm_sq() / group.N))
            lhs = complex(np.sum(f.values * np.conj(g.values)))
            rhs = complex(np.sum(fh.values * np.conj(gh.values)) / group.N)
            worst_inner = max(worst_inner, abs(lhs - rhs) / max(abs(lhs), 1e-12))
            conv_energy = float(np.sum(np.abs(convolve(f, g).values) ** 2))
            spec_energy = float(np.sum(np.abs(fh.values) ** 2 * np.abs(gh.values) ** 2) / group.N)
            worst_conv = max(worst_conv, _rel_err(conv_energy, spec_energy))
        add("parseval", gname, worst_par, tol)
        add("inner_product", gname, worst_inner, tol)
        add("convolution_energy", gname, worst_conv, tol)

        worst_box = 0.0
        for _ in range(reps):
            F = np.array(
                [[complex(2 * gen.next_double() - 1, 2 * gen.next_double() - 1) for _ in range(group.N)] for _ in range(group.N)]
            )
            worst_box = max(worst_box, _rel_err(box_norm4(F), box_norm4_pairform(F)))
        add("box_norm_pairform", gname, worst_box, tol)

        # Bohr machinery: size bound and regular-radius search, exact.
        xi = group.character_by_index(1 % group.N)
        eps = Fraction(1, 5)
        eps1 = find_regular_epsilon(group, (xi,), eps, Fraction(1, 8))
        spec = BohrSpec(group, (xi,), eps1, Fraction(1, 8))
        size = bohr_size(spec)
        bound = float(eps1**spec.d * group.N)
        add("bohr_size_bound", gname, bound, size, ok=size >= bound)
        add("regular_radius_in_range", gname, float(eps1), float(eps), ok=eps / 2 < eps1 < eps and check_regular(spec))
        att = attendant(spec, spec.kappa / (100 * spec.effective_d))
        stats = conv_support_stats(spec, att)
        add(
            "conv_support_bounds",
            gname,
            float(stats.l1_defect),
            float(2 * spec.kappa * stats.lam_size),
            ok=stats.support_bound_ok and stats.full_bound_ok and stats.defect_bound_ok,
        )

    if cfg["groups"]:
        worst_gap = 0.0
        ok_all = True
        for _ in range(max(reps, 1)):
            raw = np.array([2 * gen.next_double() - 1 for _ in range(64)])
            Z = raw - raw.mean()
            Z /= max(1.0, np.abs(Z).max())
            for p in (1.5, 2.0, 3.0):
                rep = paley_set(Z, p)
                ok_all = ok_all and rep.ok
                worst_gap = max(worst_gap, rep.bound - rep.measure)
        add("paley_level_set", None, worst_gap, 0.0, ok=ok_all)

    return {
        "config": cfg,
        "checks": checks,
        "all_pass": all(c["pass"] for c in checks),
    }
