"""Command-line front end: figure data as CSV and end-to-end transactions.

Every command is deterministic for a given ``--seed``; ``--workers`` only
changes wall-clock time.  CSV output starts with one ``#`` line holding the
parameters as JSON.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
from typing import Iterator, Sequence

import numpy as np

from . import security as sec
from .adversary import (
    BreidbartProduct,
    NaiveBases,
    cheat_probability,
    forge_card_usd,
    optimize_collective_povm,
)
from .card import SimulatedCard
from .detection import NoiseModel, Source, analytic_c, estimate_correctness_mc
from .errors import (
    DomainError,
    InsecureParametersError,
    InsufficientStatisticsError,
    OutOfValidityError,
    ProtocolError,
    StoreError,
    TransportError,
)
from .transaction import BankServer, BankService, BankStore, InProcessChannel, SocketChannel, make_policy
from .transaction.wire import parse_address, request_card, run_transaction

EXIT_OK = 0
EXIT_IO = 1
EXIT_INSECURE = 2

MODES = {m.value: m for m in sec.SecurityMode}
DEFAULT_ETAS = (0.020, 0.402)


def parse_list(text: str) -> list[float]:
    """``"0.1,0.4"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise argparse.ArgumentTypeError("step must be > 0")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def parse_int_list(text: str) -> list[int]:
    return [int(float(x)) for x in parse_list(text)]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@contextlib.contextmanager
def open_out(path: str | None) -> Iterator[io.TextIOBase]:
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(out, command: str, params: dict, header: Sequence[str], rows) -> None:
    out.write("# " + json.dumps({"command": command, **params}, sort_keys=True) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])


def model_from_args(args, mu: float | None = None, purity: float | None = None) -> NoiseModel:
    return NoiseModel(
        Source(args.source),
        args.mu[0] if mu is None else mu,
        args.eta_det,
        args.dark,
        args.purity[0] if purity is None else purity,
    )


def _safe(fn, *a):
    try:
        return fn(*a)
    except OutOfValidityError:
        return float("nan")


# commands -------------------------------------------------------------------


def cmd_sweep_mu(args) -> int:
    etas = args.eta or list(DEFAULT_ETAS)
    header = ["mu", "purity", "c_zz", "c_xx", "c", "sigma_c", "n_postselected", "n_pulses", "c_analytic", "thr_single"]
    header += [f"thr_usd_eta{e:g}" for e in etas] + [f"thr_pr_eta{e:g}" for e in etas] + ["status"]
    points = [(mu, p) for p in args.purity for mu in args.mu]
    seeds = np.random.SeedSequence(args.seed).spawn(len(points))
    rows = []
    for (mu, p), ss in zip(points, seeds):
        model = model_from_args(args, mu, p)
        block_seed, mc_seed = ss.spawn(2)
        block = np.random.default_rng(block_seed).integers(0, 2, size=(args.pairs, 3), dtype=np.uint8)
        status = "ok"
        try:
            est = estimate_correctness_mc(block, model, mc_seed, workers=args.workers)
            mc = [est.c_zz, est.c_xx, est.c, est.sigma_c, est.n_postselected, est.n_total]
        except InsufficientStatisticsError:
            status = "insufficient-statistics"
            mc = [None] * 6
        row = [mu, p, *mc, analytic_c(model).c, sec.security_threshold(sec.SecurityMode.SINGLE_PHOTON, args.epsilon)]
        row += [_safe(sec.security_threshold, sec.SecurityMode.WCS_USD, args.epsilon, e, mu) for e in etas]
        row += [sec.security_threshold(sec.SecurityMode.PHASE_RANDOMIZED, args.epsilon, e, mu) if mu > 0 else float("nan") for e in etas]
        rows.append(row + [status])
    params = dict(
        mu=args.mu, purity=args.purity, eta=etas, eta_det=args.eta_det, dark=args.dark,
        pairs=args.pairs, seed=args.seed, source=args.source, epsilon=args.epsilon,
    )
    with open_out(args.out) as out:
        write_csv(out, "sweep-mu", params, header, rows)
    return EXIT_OK


def cmd_security_region(args) -> int:
    rows = []
    for mu in args.mu:
        for et in args.eta_total:
            b = sec.loss_security_margin(mu, et)
            rows.append([mu, et, b, b > 0])
    with open_out(args.out) as out:
        write_csv(out, "security-region", {"mu": args.mu, "eta_total": args.eta_total}, ["mu", "eta_total", "B", "secure"], rows)
    return EXIT_OK


def cmd_amplify(args) -> int:
    mode = MODES[args.mode]
    header = ["n", "c_prime", "epsilon_prime", "log10_epsilon_prime", "delta", "eta", "status"]
    rows = []
    code = EXIT_OK
    mu = args.mu[0]
    for n in args.n:
        try:
            if mode is sec.SecurityMode.SINGLE_PHOTON:
                eta = 0.0
            elif args.eta:
                eta = args.eta[0]
            else:
                eta = sec.optimize_eta(mode, args.c, args.epsilon, mu, n).eta
            amp = sec.amplified_params(mode, sec.GameParams(args.c, args.epsilon, n, eta, mu))
            rows.append([n, amp.c_prime, amp.epsilon_prime, amp.log_epsilon_prime / math.log(10), amp.delta, eta, "ok"])
        except InsecureParametersError:
            rows.append([n, None, None, None, sec.delta(mode, args.c, args.epsilon, args.eta[0] if args.eta else 0.0, mu), None, "insecure"])
            code = EXIT_INSECURE
    params = dict(mode=args.mode, c=args.c, epsilon=args.epsilon, mu=mu, n=args.n, eta=args.eta)
    with open_out(args.out) as out:
        write_csv(out, "amplify", params, header, rows)
    return code


def cmd_optimal_cheat(args) -> int:
    naive = cheat_probability(NaiveBases())
    breidbart = cheat_probability(BreidbartProduct())
    res = optimize_collective_povm(args.tol, args.max_iters, args.seed, args.restarts, workers=args.workers)
    lines = [
        f"# {json.dumps({'command': 'optimal-cheat', 'restarts': args.restarts, 'tol': args.tol, 'seed': args.seed}, sort_keys=True)}",
        f"naive_bases {naive!r}",
        f"breidbart_product {breidbart!r}",
        f"collective_povm {res.value!r}",
        f"converged {int(res.converged)}",
        f"iterations {res.iterations}",
        "restart_values " + " ".join(repr(v) for v in res.restart_values),
    ]
    with open_out(args.out) as out:
        out.write("\n".join(lines) + "\n")
    return EXIT_OK


def _policy_factory(args, model: NoiseModel):
    mode = MODES[args.mode]
    eta = args.eta[0] if args.eta else 0.0
    return make_policy(model, args.c_accept, mode, args.epsilon, eta, args.max_uses)


def _seeds(seed: int) -> list[np.random.SeedSequence]:
    # [bank, vendor, adversary]; serve-bank and transact share the bank stream
    return np.random.SeedSequence(seed).spawn(3)


def cmd_serve_bank(args) -> int:
    model = model_from_args(args)
    store = BankStore(args.store)
    service = BankService(store, _policy_factory(args, model), rng=_seeds(args.seed)[0])
    host, port = parse_address(args.listen)
    with BankServer((host, port), service) as server:
        print(f"bank listening on {host}:{server.port}", file=sys.stderr, flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return EXIT_OK


def cmd_transact(args) -> int:
    model = model_from_args(args)
    bank_seed, vendor_seed, adv_seed = _seeds(args.seed)
    if args.bank:
        channel = SocketChannel(*parse_address(args.bank))
    else:
        store = BankStore(args.store)
        channel = InProcessChannel(BankService(store, _policy_factory(args, model), rng=bank_seed))
    try:
        card = request_card(channel, args.pairs)
        stats = {}
        if args.adversary == "usd":
            forged = forge_card_usd(card, model.mu, adv_seed)
            mu_bright = model.mu if args.mu_bright is None else args.mu_bright
            card = forged.as_card(mu_bright)
            stats["known_fraction"] = forged.known_fraction
        elif args.adversary == "random":
            fresh = np.random.default_rng(adv_seed).integers(0, 2, size=(len(card), 3), dtype=np.uint8)
            card = SimulatedCard(fresh, None, card.serial)
        verdict = run_transaction(channel, card, model, vendor_seed)
    finally:
        channel.close()
    out = {
        "serial": card.serial,
        "pairs": args.pairs,
        "adversary": args.adversary,
        "accept": verdict.accept,
        "reason": verdict.reason.value,
        "fraction_correct": verdict.fraction_correct,
        "valid_pair_rate": verdict.valid_pair_rate,
        "n_valid": verdict.n_valid,
        **stats,
    }
    with open_out(args.out) as fh:
        for k, v in out.items():
            fh.write(f"{k} {v!r}\n" if isinstance(v, float) else f"{k} {v}\n")
    return EXIT_OK


def cmd_store_dump(args) -> int:
    if not os.path.exists(args.store):
        raise StoreError(f"no key store at {args.store}")
    text = BankStore(args.store).dump()
    with open_out(args.out) as fh:
        fh.write(text)
    return EXIT_OK


# parser ---------------------------------------------------------------------


def _model_flags(p: argparse.ArgumentParser, mu_default: str = "0.1") -> None:
    p.add_argument("--mu", type=parse_list, default=parse_list(mu_default), help="mean photon number(s)")
    p.add_argument("--purity", type=parse_list, default=[0.93], help="state purity value(s)")
    p.add_argument("--eta-det", type=float, default=0.25, help="detector efficiency")
    p.add_argument("--dark", type=float, default=7e-5, help="dark-count probability per gate")
    p.add_argument("--source", choices=[s.value for s in Source], default=Source.WEAK_COHERENT.value)


def _policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=list(MODES), default="single-photon")
    p.add_argument("--eta", type=parse_list, default=None, help="Chernoff slack eta")
    p.add_argument("--epsilon", type=float, default=sec.PAIR_GAME_EPSILON)
    p.add_argument("--c-accept", type=float, default=0.942, help="bank's reference correctness")
    p.add_argument("--max-uses", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmoney", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-mu", help="Monte Carlo c_zz, c_xx, c versus mu with thresholds")
    _model_flags(p, "0.025,0.1,0.4,1")
    p.add_argument("--eta", type=parse_list, default=None, help="eta values for thresholds")
    p.add_argument("--epsilon", type=float, default=sec.PAIR_GAME_EPSILON)
    p.add_argument("--pairs", type=int, default=1_500_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep_mu)

    p = sub.add_parser("security-region", help="loss-attack margin B over (mu, eta_total)")
    p.add_argument("--mu", type=parse_list, default=parse_list("0.01:2:0.01"))
    p.add_argument("--eta-total", type=parse_list, default=parse_list("0:1:0.05"))
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.add_argument("--out")
    p.set_defaults(func=cmd_security_region)

    p = sub.add_parser("amplify", help="c' and epsilon' versus the number of pairs n")
    p.add_argument("--mode", choices=list(MODES), default="single-photon")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=sec.PAIR_GAME_EPSILON)
    p.add_argument("--mu", type=parse_list, default=[0.1])
    p.add_argument("--n", type=parse_int_list, default=parse_int_list("1000,3000,10000,30000,100000,300000,1000000"))
    p.add_argument("--eta", type=parse_list, default=None, help="fixed eta; optimized when omitted")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.add_argument("--out")
    p.set_defaults(func=cmd_amplify)

    p = sub.add_parser("optimal-cheat", help="pair-game cheating probabilities")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimal_cheat)

    p = sub.add_parser("serve-bank", help="run the bank on a TCP socket")
    _model_flags(p)
    _policy_flags(p)
    p.add_argument("--store", required=True)
    p.add_argument("--listen", default="127.0.0.1:7878")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve_bank)

    p = sub.add_parser("transact", help="issue, measure and verify one card")
    _model_flags(p)
    _policy_flags(p)
    p.add_argument("--pairs", type=int, default=100_000)
    p.add_argument("--bank", help="host:port of a running bank; in-process when omitted")
    p.add_argument("--store", help="key store for the in-process bank")
    p.add_argument("--adversary", choices=["none", "usd", "random"], default="none")
    p.add_argument("--mu-bright", type=float, default=None, help="forger re-emission intensity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transact)

    p = sub.add_parser("store-dump", help="list a key store")
    p.add_argument("--store", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_store_dump)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InsecureParametersError as exc:
        print(f"insecure parameters: {exc}", file=sys.stderr)
        return EXIT_INSECURE
    except (DomainError, ValueError) as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INSECURE
    except (StoreError, TransportError, ProtocolError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
