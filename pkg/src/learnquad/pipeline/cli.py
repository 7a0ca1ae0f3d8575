"""Command-line entry point ``learnquad``.

Exit status: 0 on success, 2 for invalid input, 3 for numerical failures.
"""

import argparse
import logging
import sys
from dataclasses import replace

from ..exceptions import InvalidArgumentError, NumericalError
from ..flows import load_model, map_nodes, save_model, train_model
from ..quadrature import smolyak_rule, write_rule_csv
from .config import dump_config, load_config
from .data import generate_dataset, moment_matched_transport, read_dataset
from .experiments import (
    convergence_rate,
    eigenvalue_convention_gap,
    fem_convergence_study,
    monomial_experiment,
    pde_experiment,
    pde_mc_reference,
    training_size_study,
    truncation_study,
    write_records,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("learnquad")


def _ints(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _config(args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, **overrides)


def _output(path):
    return sys.stdout if path in (None, "-") else path


def _transport(args, config):
    if getattr(args, "exact_transport", False):
        return moment_matched_transport(config), None
    if getattr(args, "model", None):
        return load_model(args.model), None
    return None, None


def cmd_sample(args):
    config = _config(args)
    generate_dataset(config, args.n or config.train_size, stream=args.stream, path=args.out)
    log.info("wrote %s", args.out)


def cmd_train(args):
    config = _config(args)
    kind = args.model or config.model
    overrides = {
        key: value
        for key, value in (
            ("epochs", args.epochs), ("batch_size", args.batch), ("lr", args.lr),
            ("cfm_sigma", args.sigma), ("n_steps", args.steps), ("seed", args.seed),
        )
        if value is not None
    }
    config = replace(config, model=kind, scale=args.scale or config.scale)
    train_config = replace(config.train_config, **overrides)
    model = train_model(kind, read_dataset(args.data), train_config, log_path=args.log)
    save_model(model, args.out)
    log.info("final loss %.6g; model written to %s", model.loss_curve_[-1], args.out)


def cmd_map_nodes(args):
    model = load_model(args.model)
    rule = map_nodes(model, smolyak_rule(model.n_features_in_, args.level))
    write_rule_csv(rule, args.out)


def cmd_monomials(args):
    config = _config(args)
    transport, _ = _transport(args, config)
    write_records(monomial_experiment(config, transport), _output(args.out))


def cmd_pde(args):
    config = _config(args)
    transport, _ = _transport(args, config)
    write_records(pde_experiment(config, transport), _output(args.out))


def cmd_mc_reference(args):
    config = _config(args)
    mean, half, n = pde_mc_reference(config)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w")
    try:
        out.write("mesh,mean,conf,n\n")
        out.write(f"{config.pde_mesh},{mean!r},{half!r},{n}\n")
    finally:
        if out is not sys.stdout:
            out.close()


def cmd_fem_convergence(args):
    config = _config(args)
    records = fem_convergence_study(config, laws=args.laws)
    write_records(records, _output(args.out))
    try:
        log.info("fitted rate vs elements: %.3f", convergence_rate(records))
    except InvalidArgumentError:
        log.info("errors are zero; no rate to fit")


def cmd_truncation(args):
    config = _config(args)
    write_records(truncation_study(config, radii=args.radii), _output(args.out))
    log.info("continuum vs lattice eigenvalue flux gap: %.3e", eigenvalue_convention_gap(config))


def cmd_trainsize_sweep(args):
    config = _config(args)
    mono, pde = training_size_study(config, sizes=args.sizes, include_pde=args.out_pde is not None)
    write_records(mono, _output(args.out_monomials))
    if pde:
        write_records(pde, args.out_pde)


def cmd_config(args):
    if not args.dump:
        raise InvalidArgumentError("use `config --dump`")
    sys.stdout.write(dump_config(_config(args)))


def build_parser():
    parser = argparse.ArgumentParser(prog="learnquad", description="Learned sparse-grid quadrature experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text, config=True):
        p = sub.add_parser(name, help=help_text)
        if config:
            p.add_argument("--config", help="INI experiment file (defaults embedded)")
            p.add_argument("--seed", type=int, help="override the master seed")
        p.set_defaults(func=func)
        return p

    p = command("sample", cmd_sample, "generate a modal coefficient dataset")
    p.add_argument("--n", type=int, help="number of samples (default: train_size)")
    p.add_argument("--out", required=True, help=".csv or .npy output")
    p.add_argument("--stream", choices=("dataset", "mc"), default="dataset")

    p = command("train", cmd_train, "train a transport model on a dataset")
    p.add_argument("--model", choices=("acf", "cfm", "otcfm"))
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", choices=("desk", "full"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--log", help="write the training curve as CSV epoch,loss")

    p = command("map-nodes", cmd_map_nodes, "map sparse-grid nodes through a trained model", config=False)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--out", required=True)

    for name, func, text in (
        ("monomials", cmd_monomials, "monomial integration errors"),
        ("pde", cmd_pde, "flux QoI errors against Monte Carlo"),
    ):
        p = command(name, func, text)
        group = p.add_mutually_exclusive_group()
        group.add_argument("--model", help="trained model file (default: train from the config)")
        group.add_argument("--exact-transport", action="store_true", help="use the moment-matched linear map")
        p.add_argument("--out", help="CSV output (default: stdout)")

    p = command("mc-reference", cmd_mc_reference, "Monte Carlo reference of the flux QoI")
    p.add_argument("--out")

    p = command("fem-convergence", cmd_fem_convergence, "mesh self-convergence of the flux")
    p.add_argument("--laws", nargs="+", choices=("gaussian", "poisson", "gamma", "bigamma"))
    p.add_argument("--out")

    p = command("truncation", cmd_truncation, "modal truncation error of the flux")
    p.add_argument("--radii", type=_ints)
    p.add_argument("--out")

    p = command("trainsize-sweep", cmd_trainsize_sweep, "errors against training-set size")
    p.add_argument("--sizes", type=_ints)
    p.add_argument("--out-monomials")
    p.add_argument("--out-pde")

    p = command("config", cmd_config, "print the effective configuration")
    p.add_argument("--dump", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
