"""Config-driven command line runner.

Commands read a TOML or JSON config, run one module pipeline, and write
machine-readable artifacts (JSON reports, CSV tables, PNG figures) into
the output directory.  Exit codes: 0 success, 1 mathematical failure
(violated condition or non-convergence), 2 usage or config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__, catalog, figures
from .conditions import (
    SampleCloud,
    check_campanato_tarsia,
    check_def1,
    check_k_condition,
    fit_beta_gamma,
)
from .exceptions import ConfigError, LinearSolveError, NonContractionError, StabilityGuardError
from .grid import BoxDomain
from .linear import solve_dirichlet
from .mt import TEST_FUNCTIONS, SmoothDomain2D, mt_identity
from .nonlinear import SolverConfig, campanato_iterate, stability_solve
from .sh import SHDecomposition, verify_sh
from .tensors import SymTensor4, ellipticity_constant

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


SCHEMAS = {
    "check-tensor": {
        "operator": {"id": str},
        "tensor": {"file": str},
        "certification": {"tol": float},
        "output": {"directory": str, "figures": bool},
    },
    "verify-sh": {
        "sh": {"file": str, "n": int, "N": int, "B": list, "A": list},
        "certification": {"tol": float},
        "output": {"directory": str, "figures": bool},
    },
    "solve-linear": {
        "domain": {"kind": str, "lower": list, "upper": list, "m": int},
        "operator": {"id": str},
        "solver": {"tol": float},
        "output": {"directory": str, "figures": bool},
    },
    "solve": {
        "domain": {"kind": str, "lower": list, "upper": list, "m": int},
        "operator": {"id": str},
        "solver": {"tol": float, "max_iter": int, "linear_tol": float},
        "output": {"directory": str, "figures": bool},
    },
    "check-ellipticity": {
        "operator": {"id": str},
        "certification": {
            "seed": int,
            "samples": int,
            "lambda": float,
            "kappa": float,
            "ct_alpha": float,
            "ct_beta": float,
            "ct_gamma": float,
        },
        "output": {"directory": str, "figures": bool},
    },
    "mt-test": {
        "domain": {"kind": str, "radius": float, "a": float, "b": float},
        "mt": {"function": str, "quad_order": int, "tolerance": float},
        "output": {"directory": str, "figures": bool},
    },
    "stability": {
        "domain": {"kind": str, "lower": list, "upper": list, "m": int},
        "operator": {"id": str},
        "solver": {"tol": float, "max_iter": int, "linear_tol": float},
        "stability": {"max_outer": int, "guard_samples": int},
        "certification": {"seed": int},
        "output": {"directory": str, "figures": bool},
    },
}

REQUIRED = {
    "check-tensor": (),
    "verify-sh": ("sh",),
    "solve-linear": ("domain", "operator"),
    "solve": ("domain", "operator"),
    "check-ellipticity": ("operator",),
    "mt-test": ("domain",),
    "stability": ("domain", "operator"),
}


def load_config(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    if p.suffix == ".json":
        with open(p) as fh:
            return json.load(fh)
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def validate_config(command, config):
    schema = SCHEMAS[command]
    if not isinstance(config, dict):
        raise ConfigError("config root must be a table")
    for section, content in config.items():
        if section not in schema:
            raise ConfigError(f"unknown config section {section!r} for command {command}")
        if not isinstance(content, dict):
            raise ConfigError(f"section {section!r} must be a table")
        for key, value in content.items():
            if key not in schema[section]:
                raise ConfigError(f"unknown key {section}.{key} for command {command}")
            want = schema[section][key]
            if want is float and isinstance(value, int):
                content[key] = float(value)
            elif want is bool:
                if not isinstance(value, bool):
                    raise ConfigError(f"{section}.{key} must be a boolean")
            elif not isinstance(content[key], want):
                raise ConfigError(
                    f"{section}.{key} must be {want.__name__}, got {type(value).__name__}"
                )
    for section in REQUIRED[command]:
        if section not in config:
            raise ConfigError(f"command {command} requires a [{section}] section")
    return config


def config_hash(config):
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()


def box_from_config(config):
    dom = config.get("domain", {})
    if dom.get("kind", "box") != "box":
        raise ConfigError("this command needs a box domain")
    lower = tuple(dom.get("lower", (0.0, 0.0)))
    upper = tuple(dom.get("upper", (1.0, 1.0)))
    return BoxDomain(lower, upper, int(dom.get("m", 32)))


def smooth_domain_from_config(config):
    dom = config.get("domain", {})
    kind = dom.get("kind", "disk")
    if kind == "disk":
        return SmoothDomain2D.disk(float(dom.get("radius", 1.0)))
    if kind == "ellipse":
        return SmoothDomain2D.ellipse(float(dom.get("a", 2.0)), float(dom.get("b", 1.0)))
    raise ConfigError(f"unknown smooth domain kind {kind!r}")


def write_report(outdir, command, config, payload):
    report = {
        "command": command,
        "config_sha256": config_hash(config),
        "version": __version__,
        "report": payload,
    }
    path = outdir / "report.json"
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
    return path


def _want_figures(config):
    return bool(config.get("output", {}).get("figures", True))


def cmd_check_tensor(config, outdir):
    if "tensor" in config:
        A = SymTensor4.from_json(Path(config["tensor"]["file"]).read_text())
    else:
        entry = catalog.get(config.get("operator", {}).get("id", "linear-laplace"))
        A = entry.operator.A
    tol = config.get("certification", {}).get("tol", 1e-8)
    res = ellipticity_constant(A, tol)
    payload = {
        "nu": res.nu,
        "argmin_eta": res.argmin_eta.tolist(),
        "argmin_a": res.argmin_a.tolist(),
        "tolerance": res.tolerance,
        "rank_one_positive": bool(res.nu > tol),
    }
    write_report(outdir, "check-tensor", config, payload)
    print(f"nu = {res.nu:.10g} ({'rank-one positive' if res.nu > tol else 'NOT positive'})")
    return 0 if res.nu > tol else 1


def cmd_verify_sh(config, outdir):
    sh_cfg = config["sh"]
    if "file" in sh_cfg:
        dec = SHDecomposition.from_json(Path(sh_cfg["file"]).read_text())
    else:
        from .tensors import Dims

        dec = SHDecomposition(
            Dims(n=int(sh_cfg["n"]), N=int(sh_cfg["N"])),
            tuple(sh_cfg["B"]),
            tuple(sh_cfg["A"]),
        )
    tol = config.get("certification", {}).get("tol", 1e-10)
    report = verify_sh(dec, tol)
    write_report(outdir, "verify-sh", config, json.loads(report.to_json()))
    print(f"structural check: {'PASS' if report.passed else 'FAIL'} {report.residuals}")
    return 0 if report.passed else 1


def _solve_common(config):
    dom = box_from_config(config)
    entry = catalog.get(config["operator"]["id"])
    f = catalog.manufacture_rhs(entry, dom)
    return dom, entry, f


def cmd_solve_linear(config, outdir):
    dom, entry, f = _solve_common(config)
    tol = config.get("solver", {}).get("tol", 1e-10)
    u, report = solve_dirichlet(entry.operator.A, f, dom, tol=tol)
    u.save(str(outdir / "solution"))
    write_report(outdir, "solve-linear", config, json.loads(report.to_json()))
    if _want_figures(config):
        figures.save_field_heatmap(u, outdir / "solution.png")
    print(
        f"linear solve: residual {report.relative_residual:.3e}, "
        f"norms ({report.norm_l2:.4e}, {report.norm_h1:.4e}, {report.norm_h2:.4e})"
    )
    return 0


def _write_convergence_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("k,d_k,ratio\n")
        for k, d, ratio in rows:
            fh.write(f"{k},{d!r},{'' if ratio is None else repr(ratio)}\n")


def cmd_solve(config, outdir):
    dom, entry, f = _solve_common(config)
    solver_cfg = config.get("solver", {})
    cfg = SolverConfig(
        tol=solver_cfg.get("tol", 1e-8),
        max_iter=solver_cfg.get("max_iter", 100),
        linear_tol=solver_cfg.get("linear_tol", 1e-10),
    )
    u, report = campanato_iterate(entry.operator, f, dom, cfg)
    u.save(str(outdir / "solution"))
    _write_convergence_csv(report.convergence_rows(), outdir / "convergence.csv")
    write_report(outdir, "solve", config, json.loads(report.to_json()))
    if _want_figures(config):
        figures.save_convergence(report.distances, report.ratios, outdir / "convergence.png")
        figures.save_field_heatmap(u, outdir / "solution.png")
    print(
        f"solve: {report.iterations} iterations, final residual "
        f"{report.final_residual:.3e}, converged={report.converged}"
    )
    return 0 if report.converged else 1


def cmd_check_ellipticity(config, outdir, seed_override=None):
    entry = catalog.get(config["operator"]["id"])
    cert = config.get("certification", {})
    seed = seed_override if seed_override is not None else cert.get("seed", 2718)
    samples = cert.get("samples", 10000)
    op = entry.operator
    cloud = SampleCloud(
        seed=seed,
        dims=op.dims,
        lower=(0.0,) * op.dims.n,
        upper=(1.0,) * op.dims.n,
        size=samples,
    )
    reports = [check_k_condition(op, op.A, op.beta, op.gamma, cloud)]
    lam = cert.get("lambda", 1.0 - op.beta / 2.0)
    kappa = cert.get("kappa", max(op.beta / 2.0, 1e-3))
    reports.append(check_def1(op, op.A, lam, kappa, cloud))
    ct = entry.ct_params or {}
    reports.append(
        check_campanato_tarsia(
            op,
            cert.get("ct_alpha", ct.get("alpha", 1.0)),
            cert.get("ct_beta", ct.get("beta", 0.45)),
            cert.get("ct_gamma", ct.get("gamma", 0.45)),
            cloud,
        )
    )
    fit = fit_beta_gamma(op, op.A, cloud)
    payload = {
        "conditions": [json.loads(r.to_json()) for r in reports],
        "fit": json.loads(fit.to_json()),
        "seed": seed,
        "samples": samples,
    }
    write_report(outdir, "check-ellipticity", config, payload)
    if _want_figures(config):
        figures.save_condition_margins(reports, outdir / "margins.png")
    for r in reports:
        print(r.summary_line())
    print(
        f"fitted beta={fit.beta:.6g} gamma={fit.gamma:.6g} "
        f"feasible={fit.feasible}"
    )
    return 0


def cmd_mt_test(config, outdir):
    dom = smooth_domain_from_config(config)
    mt_cfg = config.get("mt", {})
    fname = mt_cfg.get("function", "bump")
    if fname not in TEST_FUNCTIONS:
        raise ConfigError(f"unknown test function {fname!r}; known: {sorted(TEST_FUNCTIONS)}")
    v = TEST_FUNCTIONS[fname](dom)
    quad_order = mt_cfg.get("quad_order", 64)
    tolerance = mt_cfg.get("tolerance", 1e-6)
    orders = [o for o in (8, 16, 32, 64, 128, 256) if o < quad_order] + [quad_order]
    rows = []
    for order in orders:
        rep = mt_identity(v, dom, order)
        rows.append((order, rep.lhs, rep.rhs, rep.mismatch))
    final = rows[-1]
    with open(outdir / "convergence.csv", "w") as fh:
        fh.write("quad_order,lhs,rhs,mismatch\n")
        for row in rows:
            fh.write(f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r}\n")
    payload = {
        "function": fname,
        "lhs": final[1],
        "rhs": final[2],
        "mismatch": final[3],
        "quad_order": final[0],
        "tolerance": tolerance,
    }
    write_report(outdir, "mt-test", config, payload)
    if _want_figures(config):
        figures.save_mt_sweep(rows, outdir / "convergence.png")
    print(
        f"identity check ({fname}): lhs={final[1]:.10g} rhs={final[2]:.10g} "
        f"mismatch={final[3]:.3e}"
    )
    return 0 if final[3] <= tolerance else 1


def cmd_stability(config, outdir, seed_override=None):
    dom = box_from_config(config)
    entry = catalog.get(config["operator"]["id"])
    if entry.base_id is None:
        raise ConfigError(
            f"entry {entry.id!r} declares no base operator; stability needs a perturbed entry"
        )
    base = catalog.get(entry.base_id)
    g = catalog.manufacture_rhs(entry, dom)
    solver_cfg = config.get("solver", {})
    cfg = SolverConfig(
        tol=solver_cfg.get("tol", 1e-7),
        max_iter=solver_cfg.get("max_iter", 100),
        linear_tol=solver_cfg.get("linear_tol", 1e-10),
    )
    st = config.get("stability", {})
    seed = seed_override if seed_override is not None else config.get(
        "certification", {}
    ).get("seed", 0)
    u, report = stability_solve(
        base.operator,
        entry.operator,
        g,
        dom,
        cfg,
        max_outer=st.get("max_outer", 50),
        guard_samples=st.get("guard_samples", 2000),
        guard_seed=seed,
    )
    u.save(str(outdir / "solution"))
    rows = [
        (k, d, report.ratios[k - 1] if k >= 1 else None)
        for k, d in enumerate(report.distances)
    ]
    _write_convergence_csv(rows, outdir / "convergence.csv")
    write_report(outdir, "stability", config, json.loads(report.to_json()))
    if _want_figures(config):
        figures.save_convergence(
            report.distances, report.ratios, outdir / "convergence.png", "nested iteration"
        )
        figures.save_field_heatmap(u, outdir / "solution.png")
    print(
        f"stability solve: {report.outer_iterations} outer iterations, "
        f"residual {report.final_residual:.3e}"
    )
    return 0


def cmd_list():
    for entry_id, note in catalog.describe():
        print(f"{entry_id}: {note}")
    return 0


COMMANDS = {
    "check-tensor": cmd_check_tensor,
    "verify-sh": cmd_verify_sh,
    "solve-linear": cmd_solve_linear,
    "solve": cmd_solve,
    "check-ellipticity": cmd_check_ellipticity,
    "mt-test": cmd_mt_test,
    "stability": cmd_stability,
}


def apply_overrides(config, overrides):
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key {dotted!r} must look like section.key")
        section, key = dotted.split(".", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        config.setdefault(section, {})[key] = value
    return config


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hessiansys",
        description="solvers and certification for second-order Hessian systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "check-tensor", help="TOML or JSON config")
        p.add_argument("--seed", type=int, default=None, help="override certification seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument(
            "--set",
            action="append",
            dest="overrides",
            metavar="section.key=value",
            help="override a config entry",
        )
    sub.add_parser("list")
    args = parser.parse_args(argv)

    if args.command == "list":
        return cmd_list()

    try:
        config = load_config(args.config) if args.config else {}
        config = apply_overrides(config, args.overrides)
        if args.out is not None:
            config.setdefault("output", {})["directory"] = args.out
        validate_config(args.command, config)
        outdir = Path(config.get("output", {}).get("directory", "out"))
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command in ("check-ellipticity", "stability"):
            return COMMANDS[args.command](config, outdir, seed_override=args.seed)
        return COMMANDS[args.command](config, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LinearSolveError, NonContractionError, StabilityGuardError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
