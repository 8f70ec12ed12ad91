"""Write the synthetic OpenTitan-shaped route inventory bundled with the package.

Each asset gets ``bus_width`` lognormal route lengths whose mean and spread
roughly follow published per-asset aggregates, clipped to the stated range.
The output is synthetic; it only has the right shape for ``pentimento profile``.
"""

import argparse
import csv
import sys

import numpy as np

# path, type, bus width, mean, sd, min, max (ps)
ASSETS = [
    ("/otp_ctrl_otp_lc_data[state]", "SVT", 320, 170, 98, 39, 509),
    ("/otp_ctrl_otp_lc_data[rma_token]", "SVT", 101, 240, 123, 38, 583),
    ("/keymgr_aes_key[key][1]", "CK", 32, 538, 106, 380, 738),
    ("/keymgr_kmac_key[key][0]", "CK", 256, 318, 142, 49, 1050),
    ("/u_otp_ctrl/part_scrmbl_rsp_data", "CK", 64, 353, 146, 116, 1075),
    ("/csrng_tl_rsp[d_data]", "S", 32, 1292, 106, 1031, 1432),
    ("/u_otp_ctrl/part_otp_rdata", "S", 64, 1299, 213, 933, 1784),
    ("/flash_ctrl_otp_rsp[key]", "CK", 128, 1817, 405, 1215, 3245),
    ("/kmac_app_rsp", "S", 777, 94, 180, 15, 3398),
    ("/aes_tl_req[a_data]", "S", 32, 2115, 472, 1455, 3946),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="-")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["asset_path", "asset_type", "length_ps"])
    for path, kind, width, mean, sd, lo, hi in ASSETS:
        s2 = np.log1p((sd / mean) ** 2)
        x = rng.lognormal(np.log(mean) - s2 / 2, np.sqrt(s2), size=width)
        x = np.clip(np.round(x), lo, hi)
        x[0], x[-1] = lo, hi  # keep the stated range
        for L in x:
            w.writerow([path, kind, f"{L:g}"])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
