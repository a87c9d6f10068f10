"""Command-line front end.

Exit codes: 0 when the protocol completed (membership is printed, not
encoded in the status), 1 for usage/config errors, 2 for protocol or
transport failures.
"""

from __future__ import annotations

import argparse
import ipaddress
import logging
import random
import signal
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from sif import adversary
from sif.archive import create_archive, insert
from sif.csif_protocol import TOY_GROUP, GroupParams, load_group
from sif.errors import PolicyError, SifError
from sif.field import DEFAULT_MODULUS, FieldParams
from sif.shamir import SharingPolicy
from sif.sif_protocol import run_query
from sif.transport import statefile
from sif.transport.daemon import DaemonClient, RepositoryDaemon, parse_endpoint, timeout_seconds
from sif.transport.messages import Scheme
from sif.transport.sim import SimNetwork

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2

log = logging.getLogger("sif")


class UsageError(Exception):
    pass


@dataclass
class ArchiveConfig:
    n: int
    k: int
    modulus: int = DEFAULT_MODULUS
    scheme: Scheme = Scheme.SIF
    group: GroupParams | None = None
    state_dir: Path | None = None
    endpoints: list = field(default_factory=list)
    x_coords: tuple = ()
    timeout_ms: int | None = None

    @property
    def policy(self) -> SharingPolicy:
        return SharingPolicy(self.n, self.k, FieldParams(self.modulus), self.x_coords)

    def state_path(self, repo_id: int) -> Path:
        if self.state_dir is None:
            raise UsageError("config has no state_dir")
        return self.state_dir / f"repo-{repo_id}.sif"

    def endpoint_map(self) -> dict:
        policy = self.policy
        return {policy.coordinate(i + 1): ep for i, ep in enumerate(self.endpoints)}


def load_config(path: str | Path) -> ArchiveConfig:
    """Parse a ``key = value`` file. Relative paths resolve against the file's directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        raw[key.strip().lower()] = value.strip()
    base = path.parent
    try:
        n, k = int(raw["n"]), int(raw["k"])
    except KeyError as exc:
        raise UsageError(f"{path}: missing required key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    scheme_name = raw.get("scheme", "sif").lower()
    if scheme_name not in ("sif", "csif"):
        raise UsageError(f"{path}: scheme must be sif or csif")
    scheme = Scheme.CSIF if scheme_name == "csif" else Scheme.SIF
    group = None
    if "group" in raw:
        group = TOY_GROUP if raw["group"] == "toy" else load_group(base / raw["group"])
    modulus = int(raw["modulus"], 0) if "modulus" in raw else (group.q if group else DEFAULT_MODULUS)
    if scheme == Scheme.CSIF:
        if group is None:
            raise UsageError(f"{path}: scheme csif needs a group parameter file")
    if group is not None and modulus != group.q:
        raise UsageError(f"{path}: field modulus {modulus} must equal the group order q={group.q}")
    cfg = ArchiveConfig(
        n=n, k=k, modulus=modulus, scheme=scheme, group=group,
        state_dir=(base / raw["state_dir"]) if "state_dir" in raw else None,
        endpoints=[parse_endpoint(e) for e in raw["endpoints"].split(",")] if raw.get("endpoints") else [],
        x_coords=tuple(int(x) for x in raw["x_coords"].split(",")) if raw.get("x_coords") else (),
        timeout_ms=int(raw["timeout_ms"]) if "timeout_ms" in raw else None,
    )
    cfg.policy  # validates n, k, modulus, coordinates
    if cfg.endpoints and len(cfg.endpoints) != n:
        raise UsageError(f"{path}: {len(cfg.endpoints)} endpoints for N={n}")
    return cfg


def parse_element(text: str, modulus: int) -> int:
    """IPv4 dotted quad or integer (decimal / 0x-hex)."""
    text = text.strip()
    if "." in text:
        value = int(ipaddress.IPv4Address(text))
    else:
        value = int(text, 0)
    if not 0 <= value < modulus:
        raise ValueError(f"{text} does not fit in the field Z_{modulus}")
    return value


def format_element(value: int, as_ip: bool) -> str:
    return str(ipaddress.IPv4Address(value)) if as_ip and value < 2**32 else str(value)


def read_elements(path: str | Path, modulus: int) -> list[int]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            out.append(parse_element(line, modulus))
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: cannot parse element {line.strip()!r}: {exc}") from None
    return out


def _rng(seed: int | None) -> random.Random:
    return random.Random(seed) if seed is not None else random.SystemRandom()


def _load_states(cfg: ArchiveConfig, seed: int | None):
    repos = []
    for r in range(1, cfg.n + 1):
        path = cfg.state_path(r)
        if not path.exists():
            raise UsageError(f"missing state file {path}")
        repo = statefile.load(path, cfg.x_coords or None, group=cfg.group,
                              rng=_rng(None if seed is None else seed * 1000 + r))
        if repo.modulus != cfg.modulus or repo.policy.k != cfg.k or repo.policy.n != cfg.n:
            raise UsageError(f"{path} does not match the config (field, N or k)")
        repos.append(repo)
    return repos


def _chain(cfg: ArchiveConfig, text: str | None, rng: random.Random) -> tuple[int, ...]:
    policy = cfg.policy
    if text is None:
        ids = rng.sample(range(1, cfg.n + 1), cfg.k)
    else:
        try:
            ids = [int(t) for t in text.split(",")]
        except ValueError:
            raise UsageError(f"--chain must be comma-separated repository ids, got {text!r}") from None
        if len(ids) != cfg.k:
            raise UsageError(f"--chain must name exactly k={cfg.k} repositories")
        if len(set(ids)) != len(ids) or any(not 1 <= i <= cfg.n for i in ids):
            raise UsageError(f"--chain ids must be distinct and within 1..{cfg.n}")
    return tuple(policy.coordinate(i) for i in ids)


def _scheme(cfg: ArchiveConfig, name: str | None) -> Scheme:
    if name is None:
        return cfg.scheme
    scheme = Scheme.CSIF if name == "csif" else Scheme.SIF
    if scheme == Scheme.CSIF and cfg.group is None:
        raise UsageError("--scheme csif needs a group in the config")
    return scheme


def _timeout(cfg: ArchiveConfig) -> float:
    return timeout_seconds(cfg.timeout_ms) if cfg.timeout_ms else timeout_seconds()


# -- commands ------------------------------------------------------------------


def cmd_init(args) -> int:
    cfg = load_config(args.config)
    elements = read_elements(args.elements, cfg.modulus)
    repos = create_archive(cfg.policy, elements, _rng(args.seed))
    cfg.state_path(1).parent.mkdir(parents=True, exist_ok=True)
    for repo in repos:
        path = cfg.state_path(repo.repo_id)
        statefile.save(repo, path)
        print(f"repository {repo.repo_id}: {len(repo.shares)} shares -> {path}")
    return EXIT_OK


def cmd_query(args) -> int:
    cfg = load_config(args.config)
    rng = _rng(args.seed)
    scheme = _scheme(cfg, args.scheme)
    value = _parse_value(args.value, cfg.modulus)
    S = _chain(cfg, args.chain, rng)
    if cfg.endpoints:
        with DaemonClient(cfg.endpoint_map(), timeout=_timeout(cfg), rng=rng) as client:
            result = client.query(value, S, cfg.modulus, scheme)
    else:
        repos = _load_states(cfg, args.seed)
        network = SimNetwork(repos, seed=args.seed or 0)
        result = run_query(network, value, S, scheme=scheme)
    print("true" if result else "false")
    return EXIT_OK


def cmd_insert(args) -> int:
    cfg = load_config(args.config)
    rng = _rng(args.seed)
    value = _parse_value(args.value, cfg.modulus)
    if cfg.endpoints:
        with DaemonClient(cfg.endpoint_map(), timeout=_timeout(cfg), rng=rng) as client:
            msgs = client.insert(value, cfg.policy)
    else:
        repos = _load_states(cfg, args.seed)
        msgs = insert(value, repos, rng)
        for repo in repos:
            statefile.save(repo, cfg.state_path(repo.repo_id))
    print(f"inserted as row {msgs[0].index} ({len(msgs)} shares sent)")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = load_config(args.config)
    if not cfg.endpoints:
        raise UsageError("serve needs endpoints in the config")
    if not 1 <= args.repo_id <= cfg.n:
        raise UsageError(f"--repo-id must be within 1..{cfg.n}")
    path = cfg.state_path(args.repo_id)
    repo = statefile.load(path, cfg.x_coords or None, group=cfg.group)
    peers = cfg.endpoint_map()
    daemon = RepositoryDaemon(repo, cfg.endpoints[args.repo_id - 1], peers, timeout=_timeout(cfg),
                              persist_path=path)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    daemon.start()
    host, port = daemon.endpoint
    print(f"repository {repo.repo_id} serving {len(repo.shares)} shares on {host}:{port}", flush=True)
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    finally:
        daemon.stop()
    return EXIT_OK


def _demo_ips(rng: random.Random, count: int) -> list[int]:
    return [rng.getrandbits(32) for _ in range(count)]


def cmd_attack_demo(args) -> int:
    rng = _rng(args.seed)
    seed = args.seed or 0
    if args.scenario == "sif-collusion":
        if args.elements:
            elements = read_elements(args.elements, DEFAULT_MODULUS)
        else:
            elements = _demo_ips(rng, 20)
        policy = SharingPolicy(5, 3)
        repos = create_archive(policy, elements, rng, rngs=[random.Random(seed * 10 + r) for r in range(5)])
        net = SimNetwork(repos, seed=seed)
        S = (1, 2, 3)
        coalition = adversary.run_coalition_query(net, S, 0, {S[0], S[-1]}, erase_nonce=args.erase_nonce)
        result = adversary.sif_collusion_attack(coalition, policy.field.modulus)
        print(f"coalition R{S[0]} + R{S[-1]}, nonce erasure {'on' if args.erase_nonce else 'off'}")
        print("input:     " + " ".join(format_element(e, True) for e in elements))
        print("recovered: " + " ".join(format_element(e, True) for e in result.recovered))
        print(f"{sum(a == b for a, b in zip(result.recovered, elements))}/{len(elements)} elements recovered")
        if args.csv:
            with open(args.csv, "w") as fh:
                fh.write("row,input,recovered\n")
                for i, e in enumerate(elements):
                    rec = result.recovered[i] if i < len(result.recovered) else ""
                    fh.write(f"{i},{e},{rec}\n")
    elif args.scenario == "csif-probe":
        group = TOY_GROUP
        policy = SharingPolicy(5, 3, group.field)
        secrets_ = [3, 7]
        repos = create_archive(policy, secrets_, rng, group=group,
                               rngs=[random.Random(seed * 10 + r) for r in range(5)])
        net = SimNetwork(repos, seed=seed)
        S = (1, 2, 3)
        coalition = adversary.run_coalition_query(net, S, 0, {S[0], S[-1]}, scheme=Scheme.CSIF)
        hits = adversary.csif_collusion_probe(coalition, group, range(group.q))
        audit = adversary.audit_coalition_state(coalition, repos)
        print(f"group P={group.P} q={group.q} g={group.g}; coalition R1 + R3 of k=3")
        print("row,dictionary_hits")
        for h in hits:
            print(f"{h.row},{' '.join(map(str, h.hits)) or '-'}")
        # value coincidences are expected in an 11-element field, so report by provenance
        print(f"non-member shares in coalition state: {len(audit.foreign_provenance)}")
        if args.csv:
            with open(args.csv, "w") as fh:
                fh.write("row,hits\n")
                for h in hits:
                    fh.write(f"{h.row},{' '.join(map(str, h.hits))}\n")
    else:
        field_ = FieldParams(11)
        policy = SharingPolicy(5, 3, field_)
        repos = create_archive(policy, [1, 4, 9], rng, rngs=[random.Random(seed * 10 + r) for r in range(5)])
        net = SimNetwork(repos, seed=seed)
        transcript = adversary.observe_queries(net, 4, (1, 2, 3), args.queries)
        report = adversary.hbc_uniformity_report(transcript, field_.modulus, min_queries=min(args.queries, 10_000))
        for line in report.lines():
            print(line)
        if args.csv:
            report.to_csv(args.csv)
    return EXIT_OK


def _parse_value(text: str, modulus: int) -> int:
    try:
        return parse_element(text, modulus)
    except ValueError as exc:
        raise UsageError(f"cannot parse value {text!r}: {exc}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sif", description="Secret-shared set archive with private membership queries.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("init", help="split an element list into N repository state files")
    p.add_argument("--config", required=True)
    p.add_argument("--elements", required=True, help="newline-separated IPv4 addresses or integers")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("query", help="membership query")
    p.add_argument("--config", required=True)
    p.add_argument("--chain", help="comma-separated repository ids, initiator first")
    p.add_argument("--scheme", choices=["sif", "csif"])
    p.add_argument("--seed", type=int)
    p.add_argument("value")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("insert", help="add one element")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("value")
    p.set_defaults(func=cmd_insert)

    p = sub.add_parser("serve", help="run one repository daemon")
    p.add_argument("--config", required=True)
    p.add_argument("--repo-id", type=int, required=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("attack-demo", help="collusion and transcript-statistics demonstrations")
    p.add_argument("scenario", choices=["sif-collusion", "csif-probe", "hbc-report"])
    p.add_argument("--seed", type=int)
    p.add_argument("--elements", help="element file for sif-collusion (default: 20 random IPs)")
    p.add_argument("--erase-nonce", action="store_true", help="sif-collusion with nonce erasure enabled")
    p.add_argument("--queries", type=int, default=10_000, help="hbc-report sample size")
    p.add_argument("--csv", help="also write the table to this file")
    p.set_defaults(func=cmd_attack_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sif: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PolicyError as exc:
        print(f"sif: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SifError as exc:
        print(f"sif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"sif: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
