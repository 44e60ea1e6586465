# main.py - Command line entry points for the PAD middleware
import argparse
import asyncio
import json
import logging
import signal
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

load_dotenv()

from config.config import BENCH_CONFIG, DEFAULT_CRYPTO_SUITE, LOG_DIR, LOG_LEVEL, ConfigError
from delegator.service import DelegatorService, load_delegator_config
from pad.codec import pack_pad, parse_metadata
from pad.crypto_suite import get_suite
from pad.metadata import PadMetadata
from pad.payload import load_payload_description
from policy.model import policies_from_json
from scenario.bench import run_bench
from scenario.hospital import default_spec, load_scenario_spec, run_hospital_scenario
from scenario.timing import format_breakdown
from simulation.scale_sim import SimSweepSpec, load_sim_spec, run_sweep
from utils.common_utils import new_uuid
from utils.logging_config import setup_cli_logging, setup_service_logging

logger = logging.getLogger(__name__)


class CommandError(Exception):
    """A command failed for a reason that has no more specific code"""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _read_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CommandError("FILE_NOT_FOUND", f"{what} not found: {path}") from e
    except json.JSONDecodeError as e:
        raise CommandError("INVALID_JSON", f"{what} {path} is not valid JSON: {e}") from e


def _write_failed(error: OSError) -> CommandError:
    return CommandError("WRITE_FAILED", f"cannot write {error.filename}: {error.strerror or error}")


def _read_bytes(path: str, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError as e:
        raise CommandError("FILE_NOT_FOUND", f"{what} not found: {path}") from e


def cmd_pack(args) -> int:
    description = load_payload_description(_read_json(args.payload, "payload description"))
    policies = policies_from_json(_read_json(args.policy, "policy document"))
    base_dir = Path(args.payload).parent
    try:
        payload = description.to_payload(policies, base_dir)
    except FileNotFoundError as e:
        raise CommandError("FILE_NOT_FOUND", f"raw data file not found: {e.filename}") from e

    suite = get_suite(args.suite if args.suite is not None else (description.crypto_suite or DEFAULT_CRYPTO_SUITE))
    metadata = PadMetadata(
        data_id=description.data_id or new_uuid(),
        custodian_id=description.custodian_id,
        crypto_suite=suite.suite_id,
        key_delegator_uri=description.delegator_uri,
    )
    data_key = bytearray(suite.generate_key())
    pad_path, key_path = Path(args.out), Path(args.key_out)
    try:
        pad_bytes = pack_pad(payload, metadata, bytes(data_key))
        try:
            pad_path.write_bytes(pad_bytes)
        except OSError as e:
            raise _write_failed(e) from e
        try:
            key_path.write_text(data_key.hex() + "\n", encoding="utf-8")
        except OSError as e:
            # the PAD is unusable without its key
            pad_path.unlink(missing_ok=True)
            raise _write_failed(e) from e
    finally:
        data_key[:] = bytes(len(data_key))
    logger.info(f"Packed {len(payload.raw_data)} bytes into {args.out} ({suite.name})")
    print(metadata.data_id)
    return 0


def cmd_inspect(args) -> int:
    metadata = parse_metadata(_read_bytes(args.pad, "PAD file"))
    print(json.dumps(metadata.to_dict(), indent=2))
    return 0


def cmd_scenario(args) -> int:
    spec = load_scenario_spec(args.spec) if args.spec else default_spec()
    report = asyncio.run(run_hospital_scenario(spec))
    for case in report.cases:
        print(case.line())
    if report.timing is not None:
        print()
        print(format_breakdown(report.timing))
    print(f"\nattestations: {report.attestations}")
    if not report.passed:
        names = ", ".join(case.name for case in report.failures())
        raise CommandError("SCENARIO_FAILED", f"unexpected outcome in {names}")
    return 0


def cmd_bench(args) -> int:
    table = asyncio.run(run_bench(args.iters, args.sizes))
    print(format_breakdown(table))
    if args.csv:
        table.to_csv(args.csv, index=False)
        logger.info(f"Wrote benchmark breakdown to {args.csv}")
    return 0


def cmd_simulate(args) -> int:
    spec = load_sim_spec(args.config) if args.config else SimSweepSpec()
    if args.deterministic:
        spec = spec.model_copy(update={"deterministic": True})
    table = run_sweep(spec)
    if args.out:
        table.to_csv(args.out, index=False)
        logger.info(f"Wrote {len(table)} simulation rows to {args.out}")
    else:
        print(table.to_csv(index=False), end="")
    return 0


async def _serve(service: DelegatorService):
    stop_event = asyncio.Event()
    loop = asyncio.get_running_loop()
    for signum in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(signum, stop_event.set)
        except NotImplementedError:
            pass

    uri = await service.start()
    print(uri, flush=True)
    try:
        await stop_event.wait()
    finally:
        await service.stop()


def cmd_serve_delegator(args) -> int:
    config = load_delegator_config(args.config)
    setup_service_logging(LOG_DIR, args.log_level or LOG_LEVEL)
    asyncio.run(_serve(DelegatorService(config)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pad-middleware", description="Policy-attached data middleware")
    parser.add_argument("--log-level", default=None, help="console log level (default WARNING)")
    commands = parser.add_subparsers(dest="command", required=True)

    pack = commands.add_parser("pack", help="seal a payload and its policies into a PAD")
    pack.add_argument("--payload", required=True, help="payload description JSON")
    pack.add_argument("--policy", required=True, help="policy JSON (object or list)")
    pack.add_argument("--key-out", required=True, help="where to write the hex data key")
    pack.add_argument("--out", required=True, help="where to write the PAD")
    pack.add_argument("--suite", type=lambda v: int(v, 0), default=None, help="crypto suite id, e.g. 0x0002")
    pack.set_defaults(handler=cmd_pack)

    inspect = commands.add_parser("inspect", help="print the plaintext metadata of a PAD")
    inspect.add_argument("pad")
    inspect.set_defaults(handler=cmd_inspect)

    scenario = commands.add_parser("scenario", help="run the hospital collaboration scenario")
    scenario.add_argument("--spec", default=None, help="scenario spec JSON (default: built-in hospitals)")
    scenario.set_defaults(handler=cmd_scenario)

    bench = commands.add_parser("bench", help="measure the per-phase overhead breakdown")
    bench.add_argument("--iters", type=int, default=BENCH_CONFIG["iterations"])
    bench.add_argument("--sizes", type=int, nargs="+", default=list(BENCH_CONFIG["payload_sizes"]))
    bench.add_argument("--csv", default=None)
    bench.set_defaults(handler=cmd_bench)

    simulate = commands.add_parser("simulate", help="sweep the multi-delegator latency simulation")
    simulate.add_argument("--config", default=None, help="simulation config JSON")
    simulate.add_argument("--out", default=None, help="CSV output (default stdout)")
    simulate.add_argument("--deterministic", action="store_true", help="zero latency variance")
    simulate.set_defaults(handler=cmd_simulate)

    serve = commands.add_parser("serve-delegator", help="run a key delegator service")
    serve.add_argument("--config", required=True)
    serve.set_defaults(handler=cmd_serve_delegator)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command != "serve-delegator":
        setup_cli_logging(args.log_level or "WARNING", LOG_DIR)
    try:
        return args.handler(args)
    except KeyboardInterrupt:
        return 130
    except Exception as e:
        code = getattr(e, "code", None)
        if not isinstance(code, str):
            logger.debug("Unhandled error", exc_info=True)
            code = "INTERNAL_ERROR"
        message = " ".join((getattr(e, "message", None) or str(e)).split())
        print(f"ERROR[{code}]: {message}", file=sys.stderr)
        return 2 if isinstance(e, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
