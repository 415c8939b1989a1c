"""Command-line client of the solver service.

Every subcommand builds a request, sends it to the HTTP service, and renders
the response (CSV files, solution files, tables on stdout).  By default the
service runs in-process over an ASGI transport, so no server is needed; pass
``--url`` to talk to a remote instance instead.  ``graphfem serve`` starts a
standalone server.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click
import httpx


class NumericalFailure(click.ClickException):
    exit_code = 2


def _request(url: str | None, path: str, payload: dict) -> httpx.Response:
    if url:
        with httpx.Client(base_url=url, timeout=None) as client:
            return client.post(path, json=payload)
    # no server: run the ASGI app in-process
    import asyncio

    from .service.app import app

    async def go():
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://graphfem.local",
                                     timeout=None) as client:
            return await client.post(path, json=payload)

    return asyncio.run(go())


def _post(ctx: click.Context, path: str, payload: dict) -> dict:
    try:
        resp = _request(ctx.obj.get("url"), path, payload)
    except httpx.HTTPError as err:
        raise click.UsageError(f"cannot reach service: {err}")
    if resp.status_code >= 400:
        try:
            detail = resp.json()
        except ValueError:
            detail = {"detail": resp.text}
        kind = detail.get("kind", "")
        message = f"{detail.get('detail', resp.text)}"
        if kind == "numerical-failure" or resp.status_code == 500 and kind != "invalid-input":
            raise NumericalFailure(message)
        raise click.UsageError(message)
    return resp.json()


def _write_csv(path, columns, rows, provenance: dict | None = None) -> None:
    out = io.StringIO()
    for key, val in (provenance or {}).items():
        out.write(f"# {key}={val}\n")
    writer = csv.DictWriter(out, fieldnames=list(columns))
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in columns})
    text = out.getvalue()
    if path is None or str(path) == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


def _print_table(columns, rows) -> None:
    cols = list(columns)
    table = [[str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in table)) if table else len(c)
              for i, c in enumerate(cols)]
    click.echo("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for row in table:
        click.echo("  ".join(v.ljust(w) for v, w in zip(row, widths)))


def _load_config(path: str) -> dict:
    from .configio import inline_graph_file

    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except FileNotFoundError:
        raise click.UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise click.UsageError(f"config is not valid JSON: {err}")
    return inline_graph_file(cfg, base_dir=p.parent)


@click.group()
@click.option("--url", default=None, envvar="GRAPHFEM_URL",
              help="Base URL of a running service; default runs it in-process.")
@click.pass_context
def cli(ctx, url):
    """Solve elliptic problems on metric graphs via the graphfem service."""
    ctx.ensure_object(dict)
    ctx.obj["url"] = url


@cli.command()
@click.argument("family", type=click.Choice(["dgm", "ba"]))
@click.option("--level", type=int, default=None, help="dgm generation level.")
@click.option("--n", type=int, default=None, help="ba vertex count.")
@click.option("--m", "m_attach", type=int, default=2, help="ba edges per new vertex.")
@click.option("--seed", type=int, default=0)
@click.option("-o", "--output", type=click.Path(), required=True)
@click.pass_context
def generate(ctx, family, level, n, m_attach, seed, output):
    """Generate a graph and write it as JSON."""
    payload = {"family": family, "level": level, "n": n, "m_attach": m_attach, "seed": seed}
    data = _post(ctx, "/generate", payload)
    graph = data["graph"]
    Path(output).write_text(json.dumps(graph, indent=1) + "\n")
    click.echo(f"wrote {output}: {graph['vertices']} vertices, {len(graph['edges'])} edges")


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--direct", is_flag=True, help="Sparse direct solve instead of the interface path.")
@click.option("--prec", type=click.Choice(["none", "diag", "poly", "nn"]), default="nn")
@click.option("--solver", type=click.Choice(["bicgstab", "pcg", "richardson"]), default="bicgstab")
@click.option("--tol", type=float, default=None, help="Relative residual tolerance (default sqrt eps).")
@click.option("--maxit", type=int, default=10000)
@click.option("--theta", type=float, default=0.5, help="Richardson damping.")
@click.option("--nn-unscaled", is_flag=True, help="Drop the multiplicity scaling in the NN preconditioner.")
@click.option("-o", "--output", type=click.Path(), default=None, help="Solution JSON path.")
@click.option("--dump-system", type=click.Path(), default=None, help="MatrixMarket dump of the assembled matrix.")
@click.option("--dump-schur", type=click.Path(), default=None, help="Prefix for dense interface operator dumps.")
@click.pass_context
def solve(ctx, config, direct, prec, solver, tol, maxit, theta, nn_unscaled,
          output, dump_system, dump_schur):
    """Solve the problem described by a config file."""
    cfg = _load_config(config)
    exact = cfg.pop("exact", None)
    payload = {
        "problem": {**cfg, "exact": exact},
        "options": {
            "method": "direct" if direct else "schur",
            "prec": prec, "solver": solver,
            "tol": tol, "maxit": maxit, "theta": theta,
            "nn_scaled": not nn_unscaled,
            "include_solution": True,
            "dump_system": dump_system, "dump_schur": dump_schur,
        },
    }
    data = _post(ctx, "/solve", payload)
    report = data["report"]
    if output:
        Path(output).write_text(json.dumps(
            {"u": data["solution"], "report": report,
             "l2_error": data.get("l2_error"), "h1_error": data.get("h1_error")},
            indent=1) + "\n")
    click.echo(
        f"{report['solver']}/{report['preconditioner']}: "
        f"{report['iterations']} iterations, converged={report['converged']}, "
        f"{data['n_dof']} dofs, interface {data['interface_dim']}"
    )
    if data.get("l2_error") is not None:
        click.echo(f"errors: l2={data['l2_error']:.6e} h1={data['h1_error']:.6e}")
    if not report["converged"]:
        raise NumericalFailure(
            f"solver stopped at relative residual {report['residuals'][-1]:.3e} "
            f"after {report['iterations']} iterations"
        )


def _parse_params(_ctx, _param, value):
    try:
        return [int(v) for v in value.split(",") if v != ""]
    except ValueError:
        raise click.BadParameter("expected a comma-separated list of integers")


@cli.command()
@click.option("--dgm", "dgm_levels", callback=_parse_params, default="", help="DGM levels, e.g. 5,6,7.")
@click.option("--ba", "ba_sizes", callback=_parse_params, default="", help="BA graph sizes, e.g. 100,500.")
@click.option("--levels", callback=_parse_params, default="6", help="Mesh levels log2(1/h).")
@click.option("--precs", default="none,diag,poly,nn", help="Comma-separated preconditioners.")
@click.option("--solver", type=click.Choice(["bicgstab", "pcg", "richardson"]), default="bicgstab")
@click.option("--c", default="1")
@click.option("--p", default="1")
@click.option("--f", default="1")
@click.option("--seed", type=int, default=0)
@click.option("--theta", type=float, default=0.5)
@click.option("-o", "--output", type=click.Path(), default=None, help="CSV path (default stdout).")
@click.option("--table/--no-table", default=False, help="Also print a table.")
@click.pass_context
def bench(ctx, dgm_levels, ba_sizes, levels, precs, solver, c, p, f, seed, theta,
          output, table):
    """Iteration-count sweep over graphs, mesh levels, and preconditioners."""
    families = []
    if dgm_levels:
        families.append({"family": "dgm", "params": dgm_levels})
    if ba_sizes:
        families.append({"family": "ba", "params": ba_sizes})
    if not families:
        raise click.UsageError("give at least one of --dgm or --ba")
    prec_list = [s for s in precs.split(",") if s]
    if not prec_list:
        raise click.UsageError("empty preconditioner list")
    payload = {
        "families": families, "levels": levels, "precs": prec_list,
        "solver": solver, "c": c, "p": p, "f": f, "seed": seed, "theta": theta,
    }
    data = _post(ctx, "/bench", payload)
    provenance = {**data["coefficients"], "seed": data["seed"], "solver": solver}
    _write_csv(output, data["columns"], data["rows"], provenance)
    if table or output:
        _print_table(data["columns"], data["rows"])


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--levels", callback=_parse_params, default="3,4,5,6,7,8")
@click.option("-o", "--output", type=click.Path(), default=None, help="CSV path (default stdout).")
@click.pass_context
def convergence(ctx, config, levels, output):
    """Mesh-refinement error study; needs 'exact' in the config."""
    cfg = _load_config(config)
    if cfg.get("exact") is None:
        raise click.UsageError("config has no 'exact' expression")
    data = _post(ctx, "/convergence", {"problem": cfg, "levels": levels})
    cols = ("log2_inv_h", "h_max", "l2_error", "h1_error")
    _write_csv(output, cols, data["rows"],
               {"l2_order": data["l2_order"], "h1_order": data["h1_order"]})
    l2o, h1o = data["l2_order"], data["h1_order"]
    click.echo(f"fitted orders: l2={'n/a' if l2o is None else f'{l2o:.3f}'} "
               f"h1={'n/a' if h1o is None else f'{h1o:.3f}'}")


@cli.command()
@click.argument("config", type=click.Path())
@click.option("--levels", callback=_parse_params, default="4,6,8")
@click.option("-o", "--output", type=click.Path(), default=None, help="CSV path (default stdout).")
@click.pass_context
def cond(ctx, config, levels, output):
    """Condition number of the interface operator across mesh levels."""
    cfg = _load_config(config)
    cfg.pop("exact", None)
    data = _post(ctx, "/cond", {"problem": cfg, "levels": levels})
    cols = ("log2_inv_h", "interface_dim", "lam_min", "lam_max", "kappa")
    _write_csv(output, cols, data["rows"])


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("graphfem.service.app:app", host=host, port=port)


def main(argv=None) -> int:
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except NumericalFailure as err:
        click.echo(f"error: {err.format_message()}", err=True)
        return 2
    except click.UsageError as err:
        click.echo(f"error: {err.format_message()}", err=True)
        return 1
    except click.ClickException as err:
        click.echo(f"error: {err.format_message()}", err=True)
        return 1
    except click.exceptions.Abort:
        return 1


if __name__ == "__main__":
    sys.exit(main())
