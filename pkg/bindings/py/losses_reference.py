"""Reference path for binding tests: invoke the engine's loss kernels
directly (no bridge protocol) on a binary input file and print each float32
result as 8 hex digits, one per line.

Input layout matches the LOSSES request body: u32 n, u32 a, u32 d, then
float32 mu_deploy[n*a], mu_priv[n*a], z_clean[n*d], z_aug[n*d].
"""

from __future__ import annotations

import struct
import sys

import numpy as np

from sdfsim.training_math import behavior_loss, denoise_loss, kl_loss, total_loss


def main(path: str) -> int:
    blob = open(path, "rb").read()
    n, a, d = struct.unpack_from("<III", blob, 0)
    off = 12
    arrays = []
    for count in (n * a, n * a, n * d, n * d):
        arrays.append(np.frombuffer(blob, "<f4", count, off).reshape(n, -1))
        off += 4 * count
    mu_deploy, mu_priv, z_clean, z_aug = arrays
    lb = behavior_loss(mu_deploy, mu_priv)
    ld = denoise_loss(z_clean, z_aug)
    lk = kl_loss(z_aug)
    lt = total_loss(lb, ld, lk)
    for value in np.array([lb, ld, lk, lt], dtype="<f4"):
        print(f"{value.view(np.uint32):08x}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1]))
