"""beta certificates and the sphere-sampling cross-check oracle."""

import math

import numpy as np
import pytest

from ebstab.expressions import (
    AbsCoord,
    Affine,
    Const,
    Exp1D,
    Max,
    Sum,
    directional_derivative,
    subdifferential,
)
from ebstab.geometry import OriginTag, classify_origin, min_norm_point
from ebstab.sphere import (
    beta,
    beta_of_linear_perturbation,
    beta_sampled,
    linear_perturbation,
)

from conftest import random_expr, random_point


def test_beta_exp_at_zero():
    cert = beta(Exp1D(0, -1.0, 1), [0.0])
    assert cert.beta == -1.0
    assert cert.witness[0] == pytest.approx(-1.0, abs=1e-12)
    assert cert.origin_location.tag is OriginTag.OUTSIDE
    assert cert.residual <= 1e-12


def test_beta_cross_polytope():
    f = Max([AbsCoord(0, 2), AbsCoord(1, 2)])
    cert = beta(f, [0.0, 0.0])
    assert cert.beta == pytest.approx(math.sqrt(2.0) / 2.0, abs=1e-12)
    assert cert.origin_location.tag is OriginTag.INTERIOR
    assert np.abs(cert.witness) == pytest.approx([2 ** -0.5, 2 ** -0.5], abs=1e-9)


def test_beta_const_zero():
    cert = beta(Const(0.0, 1), [3.0])
    assert cert.beta == 0.0
    assert cert.origin_location.tag is OriginTag.ON_BOUNDARY


def test_beta_sampled_cross_polytope():
    f = Max([AbsCoord(0, 2), AbsCoord(1, 2)])
    val = beta_sampled(f, [0.0, 0.0], 10_000, seed=0)
    want = math.sqrt(2.0) / 2.0
    assert want <= val <= want + 1e-4


def test_beta_sampled_affine(rng):
    a = rng.uniform(-2, 2, size=2)
    val = beta_sampled(Affine(a, 0.2), [0.3, -0.1], 10_000, seed=1)
    assert val == pytest.approx(-float(np.linalg.norm(a)), abs=1e-6)


def test_beta_sampled_const_zero():
    assert beta_sampled(Const(0.0, 2), [0.0, 0.0], 100, seed=0) == 0.0


def test_perturbed_beta_of_constant():
    cert = beta_of_linear_perturbation(Const(0.0, 1), [0.0], [1.0], 0.1, [0.0])
    assert cert.beta == pytest.approx(-0.1, abs=1e-12)


def test_perturbed_beta_exp_sign_convention():
    # g = f + eps <u, . - 0> with u = -1 gives g = e^x - 1 - eps x and
    # subgradient 1 - eps at the origin
    for eps in (0.1, 0.5):
        cert = beta_of_linear_perturbation(Exp1D(0, -1.0, 1), [0.0], [-1.0], eps, [0.0])
        assert cert.beta == pytest.approx(-(1.0 - eps), abs=1e-12)


def test_perturbed_beta_cross_polytope_stays_positive():
    f = Max([AbsCoord(0, 2), AbsCoord(1, 2)])
    rng = np.random.default_rng(2)
    for _ in range(10):
        u = rng.normal(size=2)
        u /= np.linalg.norm(u)
        eps = float(rng.uniform(0, 0.5))
        cert = beta_of_linear_perturbation(f, [0.0, 0.0], u, eps, [0.0, 0.0])
        assert cert.beta >= math.sqrt(2.0) / 2.0 - eps - 1e-9


def test_perturbation_direction_norm_checked():
    with pytest.raises(ValueError):
        beta_of_linear_perturbation(Const(0.0, 2), [0, 0], [3.0, 0.0], 0.1, [0, 0])


# --- randomized invariants ---------------------------------------------------


def test_separation_identity_negative_beta_suite():
    rng = np.random.default_rng(21)
    found = 0
    while found < 200:
        m = int(rng.integers(1, 5))
        f = random_expr(rng, m)
        x = random_point(rng, m)
        cert = beta(f, x)
        if cert.beta >= -1e-6:
            continue
        found += 1
        dist = min_norm_point(subdifferential(f, x)).dist
        assert abs(-cert.beta - dist) <= 1e-8


def test_witness_validity_suite():
    rng = np.random.default_rng(22)
    for _ in range(150):
        m = int(rng.integers(1, 4))
        f = random_expr(rng, m)
        x = random_point(rng, m)
        cert = beta(f, x)
        dd = directional_derivative(f, x, cert.witness)
        reported = cert.beta if cert.beta != 0.0 else dd
        assert abs(dd - cert.beta) <= 1e-8 * (1.0 + abs(reported))
        assert cert.residual <= 1e-8
        assert np.linalg.norm(cert.witness) == pytest.approx(1.0, abs=1e-12)


def test_oracle_agreement_suite():
    rng = np.random.default_rng(23)
    for _ in range(40):
        m = int(rng.integers(1, 4))
        f = random_expr(rng, m)
        x = random_point(rng, m)
        exact = beta(f, x)
        raw = exact.beta if not exact.is_zero else min(exact.beta, 0.0)
        sampled = beta_sampled(f, x, 10_000, seed=int(rng.integers(1 << 16)))
        assert sampled >= raw - 1e-9
        assert sampled <= exact.beta + 1e-3


def test_perturbation_shift_bound():
    rng = np.random.default_rng(24)
    for _ in range(100):
        m = int(rng.integers(1, 4))
        f = random_expr(rng, m)
        x = random_point(rng, m)
        xbar = random_point(rng, m)
        u = rng.normal(size=m)
        u /= max(1.0, np.linalg.norm(u))
        eps = float(rng.uniform(0, 1))
        b0 = beta(f, x).beta
        b1 = beta_of_linear_perturbation(f, x, u, eps, xbar).beta
        assert abs(b1 - b0) <= eps * np.linalg.norm(u) + 1e-9


def test_positive_scaling_equivariance():
    rng = np.random.default_rng(25)
    for _ in range(60):
        m = int(rng.integers(1, 4))
        f = random_expr(rng, m)
        x = random_point(rng, m)
        lam = float(rng.uniform(0.2, 4.0))
        c0 = beta(f, x)
        c1 = beta(Sum([(lam, f)]), x)
        assert abs(c1.beta - lam * c0.beta) <= 1e-9 * (1.0 + abs(lam * c0.beta))
        if not c0.is_zero and not c1.is_zero:
            assert abs(float(c0.witness @ c1.witness)) >= 1.0 - 1e-6


def test_zero_dichotomy_matches_origin_classification():
    rng = np.random.default_rng(26)
    for _ in range(150):
        m = int(rng.integers(1, 4))
        f = random_expr(rng, m)
        x = random_point(rng, m)
        cert = beta(f, x)
        tag = classify_origin(subdifferential(f, x), tol=1e-9).tag
        if abs(cert.beta) > 1e-9:
            assert tag is not OriginTag.ON_BOUNDARY
        else:
            assert tag is OriginTag.ON_BOUNDARY


def test_linear_perturbation_value_identity(rng):
    f = Max([AbsCoord(0, 2), AbsCoord(1, 2)])
    u = np.array([0.0, 1.0])
    for eps in (0.0, 0.1, 0.7):
        g = linear_perturbation(f, u, eps, [0.0, 0.0])
        for _ in range(5):
            x = random_point(rng, 2)
            want = max(abs(x[0]), abs(x[1])) + eps * x[1]
            from ebstab.expressions import evaluate

            assert evaluate(g, x) == pytest.approx(want, abs=1e-12)
