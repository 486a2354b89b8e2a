"""Pick source SVM hyperparameters for setting (a) by cross-validation on
source-domain data drawn with a seed that the acceptance reps never use."""
import argparse

from ruledrift.kernel_svm import select_svm_config
from ruledrift.simgen import SimSetting, generate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4000)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--regression", default="deterministic")
    ap.add_argument("--seed", type=int, default=987654)
    ap.add_argument("--folds", type=int, default=5)
    args = ap.parse_args()
    data = generate(SimSetting("linear", "translation", args.regression, args.d, n=args.n, seed=args.seed)).dataset
    sigmas = [args.d ** -0.5, 0.2, 0.1, 0.05]
    costs = [1.0, 10.0, 100.0, 1000.0]
    best, table = select_svm_config(data, sigmas, costs, folds=args.folds)
    print("sigma,cost,cv_error")
    for row in table:
        print(f"{row[0]:.4g},{row[1]:g},{row[2]:.5f}")
    print(f"# selected sigma={best.sigma:.4g} lam={best.lam:.4g} (cost={1 / (2 * args.n * best.lam):g})")


if __name__ == "__main__":
    main()
