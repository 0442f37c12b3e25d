#!/usr/bin/env python3
"""Recompute every bound in a `pgglmc bounds --out` JSON file from its parameters.

Exits 0 when all quantities agree to 1e-12 relative, 1 otherwise.
Usage: check_bounds.py bounds.json [more.json ...]
"""
import json
import math
import sys

REL_TOL = 1e-12


def expected(prm):
    d = float(prm["d"])
    L, alpha, lam = prm["L"], prm["alpha"], prm["lambda"]
    mu, n, p = prm["mu"], float(prm["n"]), prm["p"]
    eta, K = prm["eta"], float(prm["steps"])
    w2_init, xs, C = prm["w2_init"], prm["xstar_norm_sq"], prm["C"]

    M = L * d ** ((1 - alpha) / p) / (mu ** (1 - alpha) * (1 + alpha) ** (1 - alpha))
    a = L * mu ** (1 + alpha) * d ** ((1 + alpha) / p) / (1 + alpha) + 0.5 * lam * mu**2 * (d + 1) ** (2 / p)
    cap = 2 / (M + 2 * lam)

    w2_sq_general = 4 * (d + lam * xs) / lam * (a + math.expm1(a))
    w2_general = math.sqrt(w2_sq_general)
    w2_simplified = 3 * math.sqrt(d * a / lam)
    simplified = a <= 0.1 and 8.24 * lam * xs < 0.76 * d
    smoothing = w2_simplified if simplified else w2_general

    ML = M + lam
    base = 1 - 0.5 * lam * eta
    g_half, g_full = base ** (K / 2), base**K
    dlogd = d * math.log(d)
    terms = {
        "initial": g_half * w2_init,
        "discretization": 1.9 * ML / lam * math.sqrt(eta * d),
        "estimator_bias": 2 * ML / lam * mu * d ** (1 / p),
        "smoothing": smoothing,
        "variance_smoothing": math.sqrt(eta) * ML * mu * (d + 3) ** (3 / p) / (math.sqrt(lam) * math.sqrt(n)),
        "variance_gradient": math.sqrt(ML) / math.sqrt(lam) / math.sqrt(n) * math.sqrt(eta) * math.sqrt(d)
        * (d + 2) ** (1 / p),
        "regularization": C * lam * dlogd**4,
    }
    total = math.fsum(terms.values())
    values = {
        "eta_cap": cap,
        "M": M,
        "a": a,
        "lemma1.gap_bound": L * mu ** (1 + alpha) * d ** ((1 + alpha) / p) / (1 + alpha),
        "lemma1.gap_envelope": L * mu ** (1 + alpha) * (2 * d * (d + p) / p) ** ((1 + alpha) / (2 * p)) / (1 + alpha),
        "lemma1.lambda_correction": 0.5 * lam * mu**2 * (d + 1) ** (2 / p),
        "lemma2.bias_bound": (ML * mu) ** 2 * d ** (2 / p),
        "lemma2.c0": 0.5 * ML * mu * (d + 3) ** (3 / p),
        "lemma2.c1": math.sqrt(2) * (d + 2) ** (2 / p),
        "lemma3.w2_sq_general": w2_sq_general,
        "lemma3.w2_general": w2_general,
        "lemma3.w2_simplified": w2_simplified,
        "theorem1.w2_mixing": total,
        "theorem1.w2_mixing_proof_form": total - terms["initial"] + g_full * w2_init,
        "theorem1.geometric_theorem": g_half,
        "theorem1.geometric_proof": g_full,
    }
    for k, v in terms.items():
        values["term." + k] = v
    if prm["eta_auto"]:
        values["eta"] = 0.9 * cap
    return values, simplified


def reported(b):
    values = {
        "eta_cap": b["eta_cap"]["value"],
        "M": b["M"]["value"],
        "a": b["a"]["value"],
        "lemma1.gap_bound": b["lemma1"]["gap_bound"]["value"],
        "lemma1.gap_envelope": b["lemma1"]["gap_envelope"]["value"],
        "lemma1.lambda_correction": b["lemma1"]["lambda_correction"]["value"],
        "lemma2.bias_bound": b["lemma2"]["bias_bound"]["value"],
        "lemma2.c0": b["lemma2"]["variance_bound"]["c0"],
        "lemma2.c1": b["lemma2"]["variance_bound"]["c1"],
        "lemma3.w2_sq_general": b["lemma3"]["w2_sq_general"],
        "lemma3.w2_general": b["lemma3"]["w2_general"],
        "lemma3.w2_simplified": b["lemma3"]["w2_simplified"],
        "theorem1.w2_mixing": b["theorem1"]["w2_mixing"],
        "theorem1.w2_mixing_proof_form": b["theorem1"]["w2_mixing_proof_form"],
        "theorem1.geometric_theorem": b["theorem1"]["geometric_theorem"],
        "theorem1.geometric_proof": b["theorem1"]["geometric_proof"],
        "eta": b["parameters"]["eta"],
    }
    for t in b["theorem1"]["terms"]:
        values["term." + t["name"]] = t["value"]
    return values


def check(path):
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    b = doc["bounds"]
    want, simplified = expected(b["parameters"])
    got = reported(b)
    ok = b["lemma3"]["simplified_applicable"] == simplified
    if not ok:
        print(f"{path}: lemma3.simplified_applicable mismatch")
    worst = 0.0
    for key, w in want.items():
        g = got[key]
        rel = abs(g - w) / abs(w) if w != 0 else abs(g)
        worst = max(worst, rel)
        if rel > REL_TOL:
            ok = False
            print(f"{path}: {key}: reported {g!r}, recomputed {w!r}, relative error {rel:.3e}")
    print(f"{path}: {len(want)} quantities, worst relative error {worst:.3e}: {'ok' if ok else 'MISMATCH'}")
    return ok


def main(argv):
    if len(argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    results = [check(p) for p in argv[1:]]
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
