"""Smoke test for the spconv extension module.

Build and install first:  maturin develop --release -m crates/python/Cargo.toml
"""

import os
import tempfile

import spconv


def close(a, b, tol):
    return all(abs(x - y) <= tol for ra, rb in zip(a, b) for x, y in zip(ra, rb))


spec = spconv.ConvSpec(3, 3, 3, s=1, p=1)
assert spec.output_shape() == (3, 3)
assert spconv.nnz_bound(spec) == spconv.nnz_oracle(spec) == 49
assert spec.dense_count() == 81

ones = [[1.0] * 3 for _ in range(3)]
t = spconv.Transform.build(ones, spec)
assert t.shape == (9, 9) and t.nnz == 49 and t.layout == "csr"
assert t.convolve(ones) == [[4.0, 6.0, 4.0], [6.0, 9.0, 6.0], [4.0, 6.0, 4.0]]

# stride 2, no padding, all-ones 2x2 kernel
spec = spconv.ConvSpec(4, 4, 2, s=2, p=0)
a = [[float(4 * i + j + 1) for j in range(4)] for i in range(4)]
out = spconv.Transform.build([[1.0, 1.0], [1.0, 1.0]], spec).convolve(a)
assert out == [[14.0, 22.0], [46.0, 54.0]], out

spec = spconv.ConvSpec(11, 9, 4, s=2, p=3)
a, k = spconv.generate_case(spec, seed=42)
assert (a, k) == spconv.generate_case(spec, seed=42)
ref = spconv.direct_conv(a, k, spec)
csr = spconv.Transform.build(k, spec, "csr")
csc = spconv.Transform.build(k, spec, "csc")
assert close(csr.convolve(a), ref, 1e-10)
assert close(csc.convolve(a), csr.convolve(a), 1e-12)
assert close(spconv.im2col_conv(a, k, spec), ref, 1e-10)
assert csr.nnz == spconv.nnz_bound(spec)

with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "t.txt")
    csr.save(path)
    assert spconv.Transform.load(path).convolve(a) == csr.convolve(a)

try:
    spconv.ConvSpec(2, 2, 5)
except ValueError as e:
    assert "kernel" in str(e) or "k" in str(e)
else:
    raise AssertionError("expected ValueError")

report = spconv.verify(max_dim=5, seeds=1)
assert report["ok"], report["failures"][:3]

print(f"python smoke test passed ({report['cases']} verify cases, {csr!r})")
