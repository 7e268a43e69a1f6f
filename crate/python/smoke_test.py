"""Smoke test for the jbstar_py extension module.

Build first:  cargo build -p jbstar-py --features extension-module --release
then copy target/release/libjbstar_py.so to python/jbstar_py.so (or set JBSTAR_PY_DIR).
"""
import cmath
import json
import os
import sys

sys.path.insert(0, os.environ.get("JBSTAR_PY_DIR", os.path.dirname(os.path.abspath(__file__))))
import jbstar_py as jb


def close(a, b, tol=1e-9):
    return a.distance(b) < tol


m = jb.Model.full(3)
a, b = m.random_element(1), m.random_element(2)
assert close(a.jordan(b), b.jordan(a))
assert close(a.u_op(m.unit()), a.jordan(a))
assert close(a.triple(a, a), a.u_op(a.adjoint()))

h = m.random_selfadjoint(3)
u = h.exp_i()
assert abs(u.norm() - 1) < 1e-12
assert close(jb.functional_calculus(lambda t: t ** 3, a), a.triple(a, a))

d = jb.generalized_inverse(a)
assert close(a.triple(a, d), a)
r = jb.range_tripotent(a)
assert close(r.triple(r, r), r)

path = [(h * (k / 8)).exp_i() for k in range(9)]
chain = jb.factor_path(path)
assert close(chain.evaluate(), u)

c = jb.Model.circle(jb.Model.full(2), 64)
w = c.winding_witness(1)
assert jb.winding_number(w) == 1
assert jb.in_principal_component(w).verdict == "certified_false"
member = jb.in_principal_component(c.random_unitary(4, 2.0))
assert member.verdict == "certified_true" and close(member.certificate.evaluate(), c.random_unitary(4, 2.0))

iso = jb.StructuredIsometry.random(m, 5)
rebuilt = jb.decompose(iso, m)
for s in range(5):
    x = m.random_unitary(10 + s)
    assert close(rebuilt(x), iso(x), 1e-6)
again = jb.StructuredIsometry.from_json(iso.to_json())
assert close(again(u), iso(u))

gen = jb.stone_parameter(lambda t: (h * t).exp_i())
assert close(gen, h, 1e-6)

ex = jb.build_nonextendable_example(c)
defect, cross = ex.check_pairs(50, 0)
assert defect < 1e-9 and cross < 1e-9 and not ex.is_extendable()

report = json.loads(jb.verify(m, seed=0, samples=20))
assert report["pass"], report

try:
    a.distance(c.unit())
    raise AssertionError("model mismatch not raised")
except jb.JbStarError:
    pass

print("smoke test passed")
