import numpy as np
import pytest
from scipy import special

from conecalc import symbols as S
from conecalc.errors import (ContaminatedDisk, EvalAtPole, NotElliptic, NotInvertibleOnLine,
                             StripMismatch)
from conecalc.symbols import (ConormalSequence, LaurentBlock, MeromorphicSymbol, add,
                              invert_conormal_sequence, invert_elliptic, invert_one_plus,
                              laurent_extract, locate_singularities, multiply, translate,
                              translation_product)

Z = MeromorphicSymbol.scalar([0.0, 1.0])


def simple_pole(p, c=1.0):
    return MeromorphicSymbol.scalar([0.0], poles=[(p, [c])])


def rand_poly_symbol(rng, d=2, deg=2):
    return MeromorphicSymbol(rng.normal(size=(deg + 1, d, d)) + 1j * rng.normal(size=(deg + 1, d, d)))


def rand_symbol(rng, d=2):
    h = rng.normal(size=(2, d, d))
    blocks = (LaurentBlock(0.3 + 0.7j, rng.normal(size=(1, d, d))),
              LaurentBlock(-1.1, rng.normal(size=(2, d, d))))
    return MeromorphicSymbol(h, blocks)


def probe(f, g, pts):
    return np.abs(f(pts) - g(pts)).max()


PTS = np.array([2.1 + 0.4j, -0.3 - 1.7j, 0.9 + 2.2j, -2.5 + 0.1j])


# -- evaluation ----------------------------------------------------------------

def test_eval_examples():
    assert S.eval(Z, 2 + 1j)[0, 0] == 2 + 1j
    assert abs(S.eval(simple_pole(1.0), 3.0)[0, 0] - 0.5) < 1e-15
    assert abs(S.eval(MeromorphicSymbol.scalar([-0.49, 0, 1]), 0.7)[0, 0]) < 1e-15
    with pytest.raises(EvalAtPole):
        S.eval(simple_pole(1.0), 1.0)


def test_json_roundtrip(rng):
    f = rand_symbol(rng)
    g = MeromorphicSymbol.from_json(f.to_json())
    assert probe(f, g, PTS) <= 1e-15 * np.abs(f(PTS)).max()


# -- algebra -------------------------------------------------------------------

def test_multiply_identity_and_cancellation():
    f = simple_pole(1.0)
    assert multiply(f, MeromorphicSymbol.identity()).allclose(f)
    c = multiply(MeromorphicSymbol.scalar([-1.0, 1.0]), f)
    assert c.poles == () and c.allclose(MeromorphicSymbol.identity())


def test_multiply_partial_fractions():
    pr = multiply(simple_pole(1.0), simple_pole(2.0))
    res = {round(b.p.real): b.coeffs.ravel() for b in pr.poles}
    assert set(res) == {1, 2}
    assert np.allclose(res[1], [-1.0]) and np.allclose(res[2], [1.0])
    assert np.allclose(pr.holo, 0)


def test_multiply_against_pointwise(rng):
    f, g = rand_symbol(rng), rand_symbol(rng)
    prod = multiply(f, g)
    ref = np.einsum("kij,kjl->kil", f(PTS), g(PTS))
    assert np.abs(prod(PTS) - ref).max() < 1e-11 * np.abs(ref).max()


def test_associative_and_distributive(rng):
    f, g, h = rand_symbol(rng), rand_symbol(rng), rand_poly_symbol(rng)
    assert multiply(multiply(f, g), h).allclose(multiply(f, multiply(g, h)), atol=1e-10)
    lhs = multiply(f, add(g, h))
    rhs = add(multiply(f, g), multiply(f, h))
    assert lhs.allclose(rhs, atol=1e-10)


def test_strip_mismatch():
    f = MeromorphicSymbol.scalar([1.0], strip=(0.0, 1.0))
    g = MeromorphicSymbol.scalar([1.0], strip=(2.0, 3.0))
    with pytest.raises(StripMismatch):
        multiply(f, g)


def test_translate_examples(rng):
    assert translate(Z, 0.0) is Z
    assert translate(Z, 1.0).allclose(MeromorphicSymbol.scalar([1.0, 1.0]))
    f = rand_symbol(rng)
    assert translate(translate(f, 0.4), -1.3).allclose(translate(f, -0.9), atol=1e-12)
    assert translate(simple_pole(1.0), 0.25).poles[0].p == 0.75


def test_translate_is_morphism(rng):
    f, g = rand_symbol(rng), rand_symbol(rng)
    lhs = translate(multiply(f, g), 0.7)
    rhs = multiply(translate(f, 0.7), translate(g, 0.7))
    assert lhs.allclose(rhs, atol=1e-10)


# -- zeros and Laurent data ----------------------------------------------------

def test_locate_quadratic():
    roots = locate_singularities(MeromorphicSymbol.scalar([-0.49, 0, 1]), (-1, 1))
    assert [m for _, m in roots] == [1, 1]
    assert abs(roots[0][0] + 0.7) < 1e-10 and abs(roots[1][0] - 0.7) < 1e-10


def test_locate_transcendental():
    roots = locate_singularities(lambda z: np.exp(z) - 2, (0, 1), im_range=(-2, 2))
    assert len(roots) == 1 and roots[0][1] == 1
    assert abs(roots[0][0] - np.log(2)) < 1e-10


def test_locate_invariant_under_pole_free_factor():
    f = MeromorphicSymbol.scalar([-0.49, 0, 1])
    g = MeromorphicSymbol.scalar([2.0 + 0.5j])
    a = locate_singularities(f, (-1, 1))
    b = locate_singularities(multiply(f, g), (-1, 1))
    assert [m for _, m in a] == [m for _, m in b]
    assert max(abs(x[0] - y[0]) for x, y in zip(a, b)) < 1e-10


def test_laurent_examples():
    blk = laurent_extract(simple_pole(0.4 + 0.1j), 0.4 + 0.1j, 0, 0.3)
    assert abs(blk.coeffs[0, 0, 0] - 1) < 1e-12
    f = MeromorphicSymbol.scalar([0.0], poles=[(0.2, [3.0, 1.0])])
    blk = laurent_extract(f, 0.2, 1, 0.5)
    assert np.allclose(blk.coeffs.ravel(), [3.0, 1.0], atol=1e-12)


def test_gamma_residue_two_radii():
    a = laurent_extract(special.gamma, 0.0, 0, 0.5, check_radius=False).coeffs.ravel()
    b = laurent_extract(special.gamma, 0.0, 0, 0.25, check_radius=False).coeffs.ravel()
    assert abs(a[0] - 1) < 1e-12 and abs(a[0] - b[0]) < 1e-10


def test_contaminated_disk():
    f = add(simple_pole(0.0), simple_pole(0.3))
    with pytest.raises(ContaminatedDisk):
        laurent_extract(f, 0.0, 0, 0.5)


# -- inversion -----------------------------------------------------------------

def test_invert_examples():
    inv = invert_elliptic(MeromorphicSymbol.identity())
    assert inv.allclose(MeromorphicSymbol.identity(), atol=1e-10)
    inv = invert_elliptic(MeromorphicSymbol.scalar([-0.3, 1.0]))
    assert len(inv.poles) == 1 and abs(inv.poles[0].p - 0.3) < 1e-10
    assert abs(inv.poles[0].coeffs[0, 0, 0] - 1) < 1e-10
    assert np.abs(inv.holo).max() < 1e-10
    inv = invert_elliptic(MeromorphicSymbol.scalar([-0.49, 0, 1]))
    res = sorted((b.p.real, b.coeffs[0, 0, 0].real) for b in inv.poles)
    assert np.allclose(res, [(-0.7, -1 / 1.4), (0.7, 1 / 1.4)], atol=1e-10)


def test_invert_matrix_and_involution(rng):
    h = MeromorphicSymbol(np.array([[[1.0, 0.3], [0.0, -0.5]], [[0.2, 0.0], [0.1, 0.4]],
                                    [[1.0, 0.0], [0.0, 1.0]]]))
    inv = invert_elliptic(h)
    assert inv.info["probe_error"] < 1e-8
    pts = np.array([3.1 + 0.2j, -2.0 + 1.4j, 0.5 - 2.5j])
    prod = np.einsum("kij,kjl->kil", inv(pts), h(pts))
    assert np.abs(prod - np.eye(2)).max() < 1e-8


def test_not_elliptic():
    h = MeromorphicSymbol(np.array([[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 0.0]]]))
    with pytest.raises(NotElliptic):
        invert_elliptic(h)


def test_invert_one_plus_scalar():
    c, p = 0.5, 0.3
    assert np.allclose(invert_one_plus(MeromorphicSymbol.zero()).holo, 0)
    l = invert_one_plus(simple_pole(p, c), beta=0.5)
    # 1 + l = (z - p) / (z - p + c)
    assert len(l.poles) == 1 and abs(l.poles[0].p - (p - c)) < 1e-10
    assert abs(l.poles[0].coeffs[0, 0, 0] + c) < 1e-10


def test_invert_one_plus_rank_one(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    w = rng.normal(size=2)
    blk = LaurentBlock(-0.8, 0.4 * np.outer(v, w)[None])
    f = MeromorphicSymbol(np.zeros((1, 2, 2)), (blk,))
    l = invert_one_plus(f, beta=0.5)
    zp = rng.uniform(-3, 3, 20) + 1j * rng.uniform(-3, 3, 20)
    one = np.eye(2)
    prod = np.einsum("kij,kjl->kil", one + f(zp), one + l(zp))
    assert np.abs(prod - one).max() < 1e-9


def test_invert_one_plus_line_check():
    # 1 + f vanishes at z = 0.5 on the line Re z = 0.5
    f = simple_pole(1.0, 0.5)
    with pytest.raises(NotInvertibleOnLine):
        invert_one_plus(f, beta=0.5)


# -- conormal sequences -----------------------------------------------------------

def test_translation_product_identity(rng):
    A = ConormalSequence(1.0, [rand_poly_symbol(rng, 1), rand_poly_symbol(rng, 1)])
    I = ConormalSequence.identity(1, 1)
    assert translation_product(A, I).allclose(A, atol=1e-12)


def test_translation_product_euler_factor():
    A = ConormalSequence(1.0, [Z])
    AB = translation_product(A, A)
    # r^-1(-r d/dr) r^-1(-r d/dr) = r^-2 ((-r d/dr) + 1)(-r d/dr)
    assert AB.terms[0].allclose(MeromorphicSymbol.scalar([0.0, 1.0, 1.0]))
    # check the operator identity on monomials r^a: (-r d/dr) r^a = -a r^a
    for a in (0.3, -1.2, 2.0):
        lhs = (-a) * (-(a - 1))
        assert abs(lhs - S.eval(AB.terms[0], -a)[0, 0]) < 1e-14


def test_translation_product_associative(rng):
    seqs = [ConormalSequence(float(mu), [rand_poly_symbol(rng, 2, 2) for _ in range(3)])
            for mu in (1, 2, 1)]
    A, B, C = seqs
    lhs = translation_product(translation_product(A, B), C)
    rhs = translation_product(A, translation_product(B, C))
    assert lhs.allclose(rhs, atol=1e-9)


def test_conormal_inverse_examples():
    zero = ConormalSequence.zero(1, 2)
    B = invert_conormal_sequence(zero)
    assert all(np.allclose(t(PTS), 0) for t in B.terms)
    A = ConormalSequence(0.0, [MeromorphicSymbol.zero(), MeromorphicSymbol.scalar([1.0])])
    B = invert_conormal_sequence(A)
    assert np.allclose(B.terms[1](PTS), -1.0)
    C = translation_product(A.one_plus(), B.one_plus())
    assert np.allclose(C.terms[0](PTS), 1.0) and np.allclose(C.terms[1](PTS), 0.0)


def test_conormal_inverse_random(rng):
    d = 2
    terms = []
    for j, p in enumerate((-0.9, -1.6 + 0.5j, -2.3)):
        v, w = rng.normal(size=d), rng.normal(size=d)
        blk = LaurentBlock(p, 0.3 * np.outer(v, w)[None])
        terms.append(MeromorphicSymbol(np.zeros((1, d, d)), (blk,)))
    A = ConormalSequence(0.0, terms)
    B = invert_conormal_sequence(A, gamma=0.0)
    C = translation_product(A.one_plus(), B.one_plus())
    zp = 0.5 + rng.uniform(-2, 2, 20) + 1j * rng.uniform(-2, 2, 20)
    assert np.abs(C.terms[0](zp) - np.eye(d)).max() < 1e-8
    for t in C.terms[1:]:
        assert np.abs(t(zp)).max() < 1e-8
