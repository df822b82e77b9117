#!/usr/bin/env python3
"""Command line interface for the PSMM simulator.

Subcommands reproduce the threshold, communication and complexity tables as
CSV, run end-to-end protocol simulations, exhaustive privacy audits and
scheme verification.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from typing import Dict, Iterable, List, Sequence

from psmm.bilinear import (
    DenseOperator,
    SchemeOperator,
    load_scheme,
    parse_scheme,
    strassen_scheme,
    verify_scheme,
)
from psmm.costs import CostModel, communication_row, format_ratio, lifted_block_ratio
from psmm.exceptions import EXIT_IO, EXIT_VALIDATION, ConfigError, PSMMError
from psmm.field import FieldSpec
from psmm.linalg import FieldMatrix, MultCounter, matmul_naive, random_matrix, transpose
from psmm.privacy import AuditParams, assert_secret_independence, enumerate_view_distribution
from psmm.protocol import ProtocolConfig, min_agents_empirical, run_protocol, synthetic_dof_instance
from psmm.rng import RngStream
from psmm.settings import get_settings
from psmm.sharing import (
    SharingParams,
    bgw_threshold,
    struct_threshold,
    symbolic_product_support,
    threshold_closed_form,
    threshold_regime,
)

logger = logging.getLogger("psmm.cli")

THRESHOLD_FIELDS = ["k", "t", "n_ours", "n_bgw", "n_exact"]
SIMULATE_FIELDS = [
    "m", "k", "t", "n", "operator", "correct",
    "upload_bytes_per_agent", "download_bytes_per_agent", "total_mults",
]
COMPLEXITY_FIELDS = ["m", "k", "t", "n", "t_l", "cost_psmm", "cost_lapsmm", "gain", "reduction_pct"]
MEASURE_FIELDS = [
    "m", "k", "depth", "dense_mults", "lifted_mults", "base_products",
    "measured_ratio", "model_ratio", "agrees",
]
COMMUNICATION_FIELDS = [
    "n", "n_ours", "n_bgw", "upload_bytes_per_agent", "download_bytes_per_agent",
    "per_agent_bytes", "bgw_per_agent_bytes_modeled", "total_bytes", "bgw_total_bytes_modeled",
]


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _render_csv(fields: Sequence[str], rows: Iterable[Dict[str, str]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _field(args: argparse.Namespace) -> FieldSpec:
    return FieldSpec(args.prime if args.prime is not None else get_settings().prime)


def _operator(args: argparse.Namespace, field: FieldSpec):
    if args.scheme:
        return SchemeOperator(load_scheme(args.scheme, field), args.depth)
    if args.operator == "strassen":
        return SchemeOperator(strassen_scheme(), args.depth)
    return DenseOperator()


def cmd_thresholds(args: argparse.Namespace) -> int:
    """Agents needed by the polynomial scheme and by BGW over a (k, t) grid."""
    fields = THRESHOLD_FIELDS + (["regime"] if args.regime else [])
    rows = []
    for k in args.k_list:
        for t in args.t_list:
            row = {
                "k": str(k),
                "t": str(t),
                "n_ours": str(threshold_closed_form(k, t)),
                "n_bgw": str(bgw_threshold(k, t)),
                "n_exact": str(symbolic_product_support(k, t).size),
            }
            if args.regime:
                row["regime"] = threshold_regime(k, t)
            rows.append(row)
    _emit(_render_csv(fields, rows), args.out)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    """Run one protocol instance and check it against the naive oracle."""
    field = _field(args)
    params = SharingParams.of(args.m, args.k, args.t)
    operator = _operator(args, field)
    secrets = RngStream(args.seed, "secrets")
    dof = None
    if args.dof_s:
        A, B, dof = synthetic_dof_instance(params, args.dof_s, secrets, field)
        empirical = min_agents_empirical(args.k, args.t, dof)
        bound = struct_threshold(args.k, args.t, args.dof_s)
        if empirical != bound:
            logger.warning(
                "reduced system needs %d evaluations, structured bound states %d", empirical, bound
            )
    else:
        A = random_matrix(args.m, args.m, secrets.derive("A"), field)
        B = random_matrix(args.m, args.m, secrets.derive("B"), field)
    n = args.n or min_agents_empirical(args.k, args.t, dof)
    config = ProtocolConfig(params, n, field, seed=args.seed, operator=operator, dof=dof)
    product, transcript = run_protocol(config, A, B)
    correct = product == matmul_naive(transpose(A), B)
    row = {
        "m": str(args.m),
        "k": str(args.k),
        "t": str(args.t),
        "n": str(n),
        "operator": operator.name,
        "correct": "true" if correct else "false",
        "upload_bytes_per_agent": str(transcript.upload_bytes_per_agent),
        "download_bytes_per_agent": str(transcript.download_bytes_per_agent),
        "total_mults": str(transcript.total_mults),
    }
    _emit(_render_csv(SIMULATE_FIELDS, [row]), args.out)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(transcript.export_report() + "\n")
    return 0 if correct else EXIT_VALIDATION


def _measure(m: int, k: int, seed: int) -> List[Dict[str, str]]:
    field = FieldSpec(get_settings().prime)
    width = m // k
    rng = RngStream(seed, "measure")
    left = random_matrix(width, m, rng.derive("left", m), field)
    right = random_matrix(m, width, rng.derive("right", m), field)
    dense = MultCounter()
    expected = DenseOperator().multiply(left, right, dense)
    rows = []
    depth = 1
    while width % (2 ** depth) == 0 and m % (2 ** depth) == 0:
        lifted = MultCounter()
        product = SchemeOperator(strassen_scheme(), depth).multiply(left, right, lifted)
        measured = lifted.total / dense.total
        model = lifted_block_ratio(depth)
        agrees = product == expected and lifted.total * model.denominator == dense.total * model.numerator
        rows.append({
            "m": str(m),
            "k": str(k),
            "depth": str(depth),
            "dense_mults": str(dense.total),
            "lifted_mults": str(lifted.total),
            "base_products": str(lifted.products),
            "measured_ratio": format_ratio(measured),
            "model_ratio": format_ratio(model),
            "agrees": "true" if agrees else "false",
        })
        depth += 1
    return rows


def cmd_complexity(args: argparse.Namespace) -> int:
    """Modeled agent computation of PSMM against LA-PSMM."""
    n = threshold_closed_form(args.k, args.t)
    rows = [
        CostModel(m, args.k, args.t, n, tl).row()
        for tl in args.tl
        for m in args.m_list
    ]
    _emit(_render_csv(COMPLEXITY_FIELDS, rows), args.out)
    if not args.measure:
        return 0
    measured = []
    for m in args.m_list:
        if m > 64 or m % args.k:
            logger.warning("skipping measurement for m=%d", m)
            continue
        measured.extend(_measure(m, args.k, args.seed))
    sys.stdout.write(("\n" if not args.out else "") + _render_csv(MEASURE_FIELDS, measured))
    return 0 if all(row["agrees"] == "true" for row in measured) else EXIT_VALIDATION


def cmd_communication(args: argparse.Namespace) -> int:
    """Per-agent and total traffic against N, with a modeled BGW baseline."""
    field = _field(args)
    n_ours = threshold_closed_form(args.k, args.t)
    if args.n_list:
        n_values = [n for n in args.n_list if n >= n_ours]
        if len(n_values) < len(args.n_list):
            logger.warning("dropping N below the decoding threshold %d", n_ours)
    else:
        n_bgw = bgw_threshold(args.k, args.t)
        step = max(1, (n_bgw - n_ours) // 8)
        n_values = list(range(n_ours, n_bgw + 1, step))
    rows = [
        communication_row(args.m, args.k, args.t, n, field.element_bits, args.bgw_factor)
        for n in n_values
    ]
    _emit(_render_csv(COMMUNICATION_FIELDS, rows), args.out)
    return 0


def _shifted(M: FieldMatrix) -> FieldMatrix:
    return M + FieldMatrix([[1] * M.cols for _ in range(M.rows)], M.field)


def cmd_privacy_audit(args: argparse.Namespace) -> int:
    """Exhaustive coalition-view audit over a small field."""
    field = FieldSpec(args.prime)
    params = AuditParams.of(args.m, args.k, args.t)
    coalition = list(range(args.coalition_size))
    n_points = max(args.coalition_size, 1)
    if n_points > field.p - 1:
        raise ConfigError(
            f"a coalition of {args.coalition_size} needs distinct nonzero points, F_{field.p} has {field.p - 1}"
        )
    points = list(range(1, n_points + 1))
    rng = RngStream(args.seed, "audit-secrets")
    A = random_matrix(args.m, args.m, rng.derive("A"), field)
    B = random_matrix(args.m, args.m, rng.derive("B"), field)

    if args.t == 1:
        print("privacy: VACUOUS (t=1, shares carry no masks)")
        return 0
    dist = enumerate_view_distribution(params, field, A, B, coalition, points, args.budget)
    verdict = assert_secret_independence(
        params, field, (A, B), (_shifted(A), _shifted(B)), coalition, points, args.budget
    )
    print(
        f"view distribution: {'UNIFORM' if dist.is_uniform else 'NON-UNIFORM'} "
        f"({dist.total} assignments, {len(dist.histogram)} distinct views)"
    )
    print(f"secret independence: {'INDEPENDENT' if verdict.passed else 'DEPENDENT'}")
    within = args.coalition_size <= args.t - 1
    if within:
        ok = dist.is_uniform and verdict.passed
    else:
        print(f"tightness witness: view {verdict.differing_view} counts {verdict.counts} (expected)")
        ok = not verdict.passed
    return 0 if ok else EXIT_VALIDATION


def cmd_scheme_verify(args: argparse.Namespace) -> int:
    """Verify a scheme file against the matmul tensor."""
    field = _field(args)
    with open(args.path, "r", encoding="utf-8") as fh:
        scheme = parse_scheme(fh.read())
    result = verify_scheme(scheme, field)
    a, b, c = scheme.dims
    summary = f"rank={scheme.rank} dims={a}x{b}x{c} char={scheme.characteristic} p={field.p}"
    if result.passed:
        print(f"PASS {summary}")
        return 0
    if result.counterexample is None:
        print(f"REFUSED {summary}: {result.reason}")
    else:
        print(f"FAIL {summary}: counterexample {result.counterexample} ({result.reason})")
    return EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="Perfectly secure matrix multiplication simulator")
    p.add_argument("-v", "--verbose", action="count", default=0, help="increase log verbosity")
    p.add_argument("--log-level", help="explicit log level (DEBUG, INFO, ...)")
    sub = p.add_subparsers(dest="cmd", required=True)

    pt = sub.add_parser("thresholds", help="agent thresholds over a (k, t) grid")
    pt.add_argument("--k-list", type=_int_list, default=[2, 4, 8, 16, 32])
    pt.add_argument("--t-list", type=_int_list, default=[2, 4, 8, 16])
    pt.add_argument("--regime", action="store_true", help="append the active branch of the threshold")
    pt.add_argument("--out", help="write CSV to file")
    pt.set_defaults(func=cmd_thresholds)

    ps = sub.add_parser("simulate", help="run the protocol end to end")
    ps.add_argument("--m", type=int, default=16)
    ps.add_argument("--k", type=int, default=2)
    ps.add_argument("--t", type=int, default=2)
    ps.add_argument("--n", type=int, help="number of agents, defaults to the minimum")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--prime", type=int)
    ps.add_argument("--operator", choices=["dense", "strassen"], default="dense")
    ps.add_argument("--depth", type=int, default=1, help="lifting depth of a scheme operator")
    ps.add_argument("--scheme", help="scheme file to use as the agent operator")
    ps.add_argument("--dof-s", type=int, help="decode a synthetic instance with s latent blocks")
    ps.add_argument("--report", help="write the JSON transcript to file")
    ps.add_argument("--out", help="write CSV to file")
    ps.set_defaults(func=cmd_simulate)

    pc = sub.add_parser("complexity", help="modeled agent computation")
    pc.add_argument("--m-list", type=_int_list, default=[64, 128, 256, 512, 1024])
    pc.add_argument("--k", type=int, default=8)
    pc.add_argument("--t", type=int, default=4)
    pc.add_argument("--tl", type=_int_list, required=True, help="learned ranks T_l")
    pc.add_argument("--measure", action="store_true", help="also measure Strassen lifting for m <= 64")
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--out", help="write CSV to file")
    pc.set_defaults(func=cmd_complexity)

    pm = sub.add_parser("communication", help="per-agent traffic against N")
    pm.add_argument("--m", type=int, default=1024)
    pm.add_argument("--k", type=int, default=8)
    pm.add_argument("--t", type=int, default=8)
    pm.add_argument("--n-list", type=_int_list)
    pm.add_argument("--prime", type=int)
    pm.add_argument("--bgw-factor", type=float, default=2.0, help="modeled BGW per-agent traffic factor")
    pm.add_argument("--out", help="write CSV to file")
    pm.set_defaults(func=cmd_communication)

    pa = sub.add_parser("privacy-audit", help="exhaustive coalition-view audit")
    pa.add_argument("--prime", type=int, default=5)
    pa.add_argument("--m", type=int, default=2)
    pa.add_argument("--k", type=int, default=2)
    pa.add_argument("--t", type=int, default=2)
    pa.add_argument("--coalition-size", type=int, default=1)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--budget", type=int, help="maximum mask assignments to enumerate")
    pa.set_defaults(func=cmd_privacy_audit)

    pv = sub.add_parser("scheme-verify", help="verify a bilinear scheme file")
    pv.add_argument("path")
    pv.add_argument("--prime", type=int)
    pv.set_defaults(func=cmd_scheme_verify)

    return p


def _configure_logging(args: argparse.Namespace) -> None:
    if args.log_level:
        level = getattr(logging, args.log_level.upper(), logging.WARNING)
    else:
        level = max(logging.DEBUG, logging.WARNING - 10 * args.verbose)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        return args.func(args)
    except PSMMError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
