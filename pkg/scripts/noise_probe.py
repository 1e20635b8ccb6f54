"""Empirical noise budget at the Table 1 parameters.

Prints per-slot error statistics for fresh symmetric and public-key
encryption, flooding, one plaintext multiply + rescale, and the full
encrypted logit.
"""

import argparse

import numpy as np

from hecredit import ckks
from hecredit.bench import prepare_model
from hecredit.model import evaluate_encrypted, logit_plain


def stats(label, errs):
    errs = np.concatenate([np.ravel(e) for e in errs])
    print(f"{label:<28} std {errs.std():.2e}  max {np.abs(errs).max():.2e}  n={errs.size}")


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    pr = ckks.keygen(ckks.TABLE1_PARAMS, rng)

    def dec(ct, flood=False):
        return ckks.decode(ckks.decrypt(ct, pr, flood=flood, rng=rng))

    sym, pub, flood, mul = [], [], [], []
    for _ in range(args.trials):
        x = rng.uniform(-4, 4, 2048)
        ct = ckks.encrypt_symmetric(ckks.encode(x, pr), pr, rng)
        sym.append(dec(ct) - x)
        flood.append(dec(ct, True) - x)
        pub.append(dec(ckks.encrypt(ckks.encode(x, pr), pr.public, rng)) - x)
        w = rng.uniform(-1, 1, 2048)
        mul.append(dec(ckks.rescale(ckks.mul_plain(ct, ckks.encode(w, pr)))) - x * w)
    stats("symmetric encryption", sym)
    stats("symmetric + flooding", flood)
    stats("public-key encryption", pub)
    stats("mul_plain + rescale", mul)

    model, Xte, _, _ = prepare_model(seed=args.seed, n_synthetic=5000)
    logit_err = []
    for x in Xte[: args.trials]:
        ct = ckks.encrypt_symmetric(ckks.encode(model.stats.apply(x), pr), pr, rng)
        got = dec(evaluate_encrypted(ct, model, pr.public), True)[0]
        logit_err.append(got - logit_plain(x, model))
    stats("encrypted logit", [np.array(logit_err)])


if __name__ == "__main__":
    main()
