"""Command-line front end: ``gstfpr verify|fpr|design|fisher|simulate``.

Exit codes: 0 success, 1 invalid input or failed check, 2 numerical failure.
Every option can also be set through an environment variable named
``GSTFPR_<COMMAND>_<OPTION>`` (for example ``GSTFPR_FPR_CSSP=rrqr``).
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from .builtin import BUILTINS, load_builtin
from .design import (build_design, count_report, format_count_report, read_design,
                     write_design)
from .errors import GSTDesignError, NumericalError
from .fileio import check_labels, file_digest, read_circuit_list, read_gateset, write_gateset
from .fisher import PROB_CLIP, format_scaling_report, scaling_report
from .fpr import pair_lower_bound, read_fpr, run_fpr, write_fpr
from .germs import (EIG_TOL, amplified_bases, check_amplificational_completeness,
                    fiducial_completeness, format_verify_report, germ_concat)
from .linalg import RANK_TOL
from .noise import NOISE_CLASSES, NoiseModelSpec, sample_noisy_gateset, simulate_dataset, write_dataset
from .ptm import PARAMETERIZATIONS

FPR_MODES = {"none": None, "pgg-greedy": "greedy", "pgg-rrqr": "rrqr"}


class _Group(click.Group):
    """Maps library errors and usage errors onto the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        extra.setdefault("auto_envvar_prefix", "GSTFPR")
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else 0
        except click.ClickException as exc:
            exc.show()
            code = 1
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = 1
        except NumericalError as exc:
            click.echo(f"numerical error: {exc}", err=True)
            code = 2
        except GSTDesignError as exc:
            click.echo(f"error: {exc}", err=True)
            code = 1
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            code = 1
        if standalone_mode:
            sys.exit(code)
        return code


@dataclass
class Inputs:
    gateset: object
    germs: list
    prep: list
    meas: list
    reference: list | None
    digests: dict


def _existing(**kw):
    return click.Path(exists=True, dir_okay=False, path_type=Path, **kw)


def input_options(need_germs=True, need_fiducials=True):
    def deco(fn):
        opts = [
            click.option("--builtin", type=click.Choice(BUILTINS), default=None,
                         help="Use a shipped gate set with its fiducials and germs."),
            click.option("--gateset", "gateset_path", type=_existing(), default=None,
                         help="Gate-set file."),
            click.option("--param", type=click.Choice(PARAMETERIZATIONS), default="TP",
                         show_default=True, help="Gate-set parameterization."),
        ]
        if need_germs:
            opts += [
                click.option("--germs", "germs_path", type=_existing(), default=None),
                click.option("--reference-germs", "reference_path", type=_existing(),
                             default=None, help="Germs defining the amplifiable subspace."),
            ]
        if need_fiducials:
            opts += [
                click.option("--fiducials", "fid_path", type=_existing(), default=None,
                             help="Fiducials used for both preparation and measurement."),
                click.option("--prep-fiducials", "prep_path", type=_existing(), default=None),
                click.option("--meas-fiducials", "meas_path", type=_existing(), default=None),
            ]
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return deco


def tolerance_options(fn):
    fn = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
                      help="Worker threads.")(fn)
    fn = click.option("--eig-tol", type=float, default=EIG_TOL, show_default=True,
                      help="Eigenvalue clustering tolerance for commutant projections.")(fn)
    fn = click.option("--tol-rank", type=float, default=RANK_TOL, show_default=True,
                      help="Relative singular-value cutoff for every rank decision.")(fn)
    return fn


def _load_inputs(params: dict) -> Inputs:
    builtin = params.get("builtin")
    digests = {}
    b = load_builtin(builtin, params["param"]) if builtin else None
    if params.get("gateset_path"):
        gs = read_gateset(params["gateset_path"], params["param"])
        digests["gateset"] = file_digest(params["gateset_path"])
    elif b:
        gs = b.gateset
        digests["gateset"] = f"builtin-{builtin}"
    else:
        raise click.UsageError("give --gateset or --builtin")

    def circuits(key, default, what):
        path = params.get(key)
        if path:
            digests[what] = file_digest(path)
            out = read_circuit_list(path)
        elif default is not None:
            digests[what] = f"builtin-{builtin}"
            out = default
        else:
            return None
        check_labels(gs, out, what)
        return out

    germs = circuits("germs_path", b.germs if b else None, "germs")
    fid = circuits("fid_path", None, "fiducials")
    prep = circuits("prep_path", fid if fid is not None else (b.prep_fiducials if b else None),
                    "prep")
    meas = circuits("meas_path", fid if fid is not None else (b.meas_fiducials if b else None),
                    "meas")
    reference = circuits("reference_path", None, "reference")
    return Inputs(gs, germs, prep, meas, reference, digests)


def _require(value, flag):
    if value is None:
        raise click.UsageError(f"missing {flag} (or --builtin)")
    return value


def _config_hash(command: str, params: dict, digests: dict) -> str:
    clean = {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()
             if not k.endswith("_path") and k not in ("output", "noisy_output", "threads")}
    blob = json.dumps({"command": command, "params": clean, "inputs": digests},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _safe(text: str) -> str:
    return "".join("_" if ch.isspace() or ch == "=" else ch for ch in str(text)) or "-"


@click.group(cls=_Group)
@click.version_option(package_name="gstfpr")
def cli():
    """Gate set tomography experiment design with fiducial pair reduction."""


@cli.command()
@input_options()
@tolerance_options
@click.pass_context
def verify(ctx, **params):
    """Check informational and amplificational completeness."""
    inp = _load_inputs(params)
    germs = _require(inp.germs, "--germs")
    prep = _require(inp.prep, "--fiducials/--prep-fiducials")
    meas = _require(inp.meas, "--fiducials/--meas-fiducials")
    workers = params["threads"]
    bases = amplified_bases(inp.gateset, germs, params["eig_tol"], params["tol_rank"], workers)
    J, _ = germ_concat(bases)
    comp = check_amplificational_completeness(J, inp.gateset, inp.reference,
                                              params["tol_rank"], params["eig_tol"])
    fids = fiducial_completeness(inp.gateset, prep, meas, params["tol_rank"])
    click.echo(format_verify_report(bases, comp, fids), nl=False)
    return 0 if comp.complete and fids.complete else 1


@cli.command()
@input_options()
@tolerance_options
@click.option("--cssp", type=click.Choice(["greedy", "rrqr"]), default="greedy",
              show_default=True, help="Column subset selector for stage one.")
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the fiducial-pair assignment here.")
def fpr(**params):
    """Run both fiducial pair reduction stages."""
    inp = _load_inputs(params)
    gs = inp.gateset
    germs = _require(inp.germs, "--germs")
    prep = _require(inp.prep, "--fiducials/--prep-fiducials")
    meas = _require(inp.meas, "--fiducials/--meas-fiducials")
    pa, fa = run_fpr(gs, germs, prep, meas, params["cssp"], inp.reference,
                     params["tol_rank"], params["eig_tol"], params["threads"])
    n_e = gs.num_outcomes
    click.echo(f"{'germ':<28} {'k':>4} {'pairs':>6} {'min':>5}")
    for g, k, pairs in zip(fa.germs, pa.k, fa.pairs):
        click.echo(f"{str(g):<28} {k:>4} {len(pairs):>6} {pair_lower_bound(k, n_e):>5}")
    bound = count_report(n_amplifiable=pa.total, num_outcomes=n_e).lower_bound
    click.echo(f"sum k = {pa.total}")
    click.echo(f"total pairs = {fa.num_pairs} (full: {len(germs) * len(prep) * len(meas)})")
    click.echo(f"lower bound ceil(N_a/(N_E-1)) = {bound}")
    if params["output"]:
        header = {"mode": fa.mode, "config": _config_hash("fpr", params, inp.digests),
                  "gateset": _safe(gs.name)}
        write_fpr(fa, params["output"], header)
    return 0


def _parse_Ls(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from None


@cli.command()
@input_options()
@tolerance_options
@click.option("--L", "Ls", default="1,2,4,8,16,32", show_default=True,
              help="Comma-separated ascending max depths.")
@click.option("--fpr", "fpr_mode", type=click.Choice(list(FPR_MODES)), default="none",
              show_default=True)
@click.option("--fpr-file", "fpr_path", type=_existing(), default=None,
              help="Use a saved fiducial-pair assignment instead of recomputing.")
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), default=None)
def design(**params):
    """Build a full or reduced experiment design."""
    inp = _load_inputs(params)
    gs = inp.gateset
    germs = _require(inp.germs, "--germs")
    prep = _require(inp.prep, "--fiducials/--prep-fiducials")
    meas = _require(inp.meas, "--fiducials/--meas-fiducials")
    Ls = _parse_Ls(params["Ls"])
    fa, n_a = None, None
    if params["fpr_path"]:
        fa = read_fpr(params["fpr_path"])
        inp.digests["fpr"] = file_digest(params["fpr_path"])
    elif FPR_MODES[params["fpr_mode"]]:
        pa, fa = run_fpr(gs, germs, prep, meas, FPR_MODES[params["fpr_mode"]], inp.reference,
                         params["tol_rank"], params["eig_tol"], params["threads"])
        n_a = pa.total
    meta = {"gateset": _safe(gs.name), "germs": inp.digests.get("germs", "-"),
            "config": _config_hash("design", params, inp.digests)}
    d = build_design(germs, prep, meas, Ls, fa, meta)
    if n_a is None:
        J, _ = germ_concat(amplified_bases(gs, germs, params["eig_tol"], params["tol_rank"],
                                           params["threads"]))
        n_a = check_amplificational_completeness(J, gs, inp.reference, params["tol_rank"],
                                                 params["eig_tol"]).n_amplifiable
    click.echo(format_count_report(count_report(d, n_amplifiable=n_a,
                                                num_outcomes=gs.num_outcomes)), nl=False)
    if params["output"]:
        write_design(d, params["output"])
    return 0


@cli.command()
@input_options(need_germs=False, need_fiducials=False)
@tolerance_options
@click.option("--design", "design_path", type=_existing(), required=True)
@click.option("--shots", type=click.IntRange(min=0), default=1000, show_default=True)
@click.option("--prob-clip", type=float, default=PROB_CLIP, show_default=True,
              help="Lower clip on probabilities before division.")
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), default=None)
def fisher(**params):
    """Fisher-information spectra of a design at each max depth."""
    inp = _load_inputs(params)
    d = read_design(params["design_path"])
    check_labels(inp.gateset, d.circuits, "design circuit")
    inp.digests["design"] = file_digest(params["design_path"])
    rep = scaling_report(inp.gateset, d, shots=params["shots"], eps=params["prob_clip"],
                         tol=params["tol_rank"], workers=params["threads"])
    text = format_scaling_report(rep, {"config": _config_hash("fisher", params, inp.digests),
                                       "shots": params["shots"]})
    click.echo(text, nl=False)
    if params["output"]:
        Path(params["output"]).write_text(text, encoding="utf-8")
    return 0


@cli.command()
@input_options(need_germs=False, need_fiducials=False)
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--design", "design_path", type=_existing(), required=True)
@click.option("--noise", type=click.Choice(NOISE_CLASSES), default="coherent", show_default=True)
@click.option("--ham-sigma", type=float, default=0.01, show_default=True)
@click.option("--stoch-max", type=float, default=1e-4, show_default=True)
@click.option("--shots", type=click.IntRange(min=0), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--noisy-output", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Also write the sampled noisy gate set.")
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
def simulate(**params):
    """Sample a noisy gate set and simulate counts for a design."""
    inp = _load_inputs(params)
    d = read_design(params["design_path"])
    check_labels(inp.gateset, d.circuits, "design circuit")
    inp.digests["design"] = file_digest(params["design_path"])
    spec = NoiseModelSpec(params["noise"], params["ham_sigma"], params["stoch_max"],
                          params["seed"])
    noisy = sample_noisy_gateset(inp.gateset, spec)
    ds = simulate_dataset(noisy, d, params["shots"], params["seed"], params["threads"])
    header = {"config": _config_hash("simulate", params, inp.digests), "noise": spec.kind}
    write_dataset(ds, params["output"], header)
    if params["noisy_output"]:
        write_gateset(noisy, params["noisy_output"], header)
    click.echo(f"wrote {len(ds)} circuits x {ds.shots} shots to {params['output']}")
    return 0


def main():
    cli()


if __name__ == "__main__":
    main()
