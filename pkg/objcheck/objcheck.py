"""
Check systems of communicating objects for compatibility and compliance.

    python -m objcheck check dev.obj dev-refactored.obj
    python -m objcheck simulate dev.obj --system dev --seed 7
    python -m objcheck lts two-party.obj --system two-party --dot two-party.dot

Every system in the workspace is checked for compatibility; every
``system X: Y`` is also checked for compliance with ``Y``. Exit status is
0 when nothing (but information) is reported, 1 when there are
diagnostics, 2 on usage or I/O problems.
"""

import logging
import sys
import traceback
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import click

from objcheck import __version__
from objcheck.compat import check_compatibility, simulate, step_label
from objcheck.composition import system_graph, to_dot
from objcheck.diagnostics import (CheckError, Diagnostic, ParseError, ResolveError,
                                  dump_document, render_human, render_json, sort_diagnostics,
                                  visible)
from objcheck.options import COLOR_MODES, FORMATS, Options
from objcheck.refinement import check_compliance, observable_lts
from objcheck.resolve import ResolvedSystem, resolve
from objcheck.syntax import SystemDecl, parse

logger = logging.getLogger(__name__)

debug = False


class WorkspaceError(click.ClickException):
    """A source file could not be read."""
    exit_code = 2


@dataclass
class Workspace:
    sources: Dict[str, str]
    decls: List[SystemDecl] = field(default_factory=list)
    diagnostics: List[Diagnostic] = field(default_factory=list)

    def system_names(self) -> List[str]:
        return sorted({d.name for d in self.decls})


def load_sources(sources: Dict[str, str]) -> Workspace:
    """Parse every source text; files that fail to parse contribute diagnostics only."""
    workspace = Workspace(dict(sources))
    for file_id, text in sorted(sources.items()):
        try:
            workspace.decls.extend(parse(text, file_id))
        except ParseError as e:
            logger.debug('%s: %d syntax diagnostic(s)', file_id, len(e.diagnostics))
            workspace.diagnostics.extend(e.diagnostics)
    return workspace


def load_workspace(paths: Sequence[str]) -> Workspace:
    sources = {}
    for path in paths:
        try:
            sources[str(path)] = Path(path).read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise WorkspaceError(f'cannot read {path}: {e}')
    return load_sources(sources)


@dataclass(frozen=True)
class SystemReport:
    name: str
    diagnostics: Tuple[Diagnostic, ...] = ()


def check_system(name: str, workspace: Workspace, options: Options,
                 compat: bool = True, compliance: bool = True) -> SystemReport:
    """Run the compatibility and compliance checks of one system

    Parameters
    ----------
    name : str
        The system to check
    workspace : Workspace
        Where ``name`` and everything it uses or refines is declared
    options : Options
        Bounds of the exploration
    compat : bool, optional
        Check compatibility, by default True
    compliance : bool, optional
        Check compliance with the declared parent, by default True

    Returns
    -------
    SystemReport
        Every diagnostic, informational ones included
    """
    try:
        system = resolve(workspace.decls, name)
    except ResolveError as e:
        return SystemReport(name, tuple(e.diagnostics))

    diags: List[Diagnostic] = []
    if compat:
        diags.extend(check_compatibility(system, options))
    if compliance and system.parent is not None:
        diags.extend(check_compliance(system, system.parent, options))
    logger.info('%s: %d diagnostic(s)', name, len(diags))
    return SystemReport(name, tuple(diags))


@dataclass
class Report:
    diagnostics: List[Diagnostic]
    systems_checked: int

    @property
    def exit_code(self) -> int:
        return 1 if visible(self.diagnostics) else 0


def check_workspace(workspace: Workspace, options: Options = None,
                    compat: bool = True, compliance: bool = True) -> Report:
    """Check the selected systems of ``workspace``, in parallel when ``options.jobs`` > 1."""
    options = options or Options()
    names = list(options.root_systems or workspace.system_names())
    check = partial(check_system, workspace=workspace, options=options,
                    compat=compat, compliance=compliance)

    if options.jobs > 1 and len(names) > 1:
        logger.info('checking %d systems with %d workers', len(names), options.jobs)
        with Pool(min(options.jobs, len(names))) as p:
            reports = p.map(check, names)
    else:
        reports = [check(name) for name in names]

    diags = list(workspace.diagnostics)
    for report in reports:
        diags.extend(report.diagnostics)
    # a broken import is reported by every system that uses it
    unique = list(dict.fromkeys(diags))
    return Report(sort_diagnostics(unique), len(names))


def resolve_one(workspace: Workspace, name: str) -> ResolvedSystem:
    if workspace.diagnostics:
        raise ParseError(workspace.diagnostics)
    if name not in workspace.system_names():
        raise click.BadParameter(f'no system named {name} in the workspace',
                                 param_hint="'--system'")
    return resolve(workspace.decls, name)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _configure_logging() -> None:
    logging.basicConfig(level=logging.DEBUG if debug else logging.WARNING,
                        stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')


def _emit_diagnostics(diags: Sequence[Diagnostic], workspace: Workspace, fmt: str,
                      color: str, systems: int = 0) -> None:
    if fmt == 'json':
        click.echo(render_json(diags))
        return
    text = render_human(diags, workspace.sources, systems, color=color != 'never')
    click.echo(text, nl=False, color=True if color == 'always' else None)


def exploration_options(f):
    """--queue-bound, --max-configs and --invoke-depth."""
    f = click.option('--invoke-depth', type=click.IntRange(min=1), default=1000, show_default=True,
                     help='Longest chain of behaviour invocations without an action.')(f)
    f = click.option('--max-configs', type=click.IntRange(min=1), default=100000,
                     show_default=True, help='Cap on explored configurations.')(f)
    f = click.option('--queue-bound', type=click.IntRange(min=1), default=2, show_default=True,
                     help='Capacity of every internal channel.')(f)
    return f


files_argument = click.argument('files', nargs=-1, required=True,
                                type=click.Path(exists=True, dir_okay=False))


@click.group()
@click.option('--debug', 'debug_flag', is_flag=True,
              help='Log exploration details and print full tracebacks.')
@click.version_option(__version__, prog_name='objcheck')
def cli(debug_flag: bool) -> None:
    """Check systems of communicating objects."""
    global debug
    if debug_flag:
        debug = True
    _configure_logging()


@cli.command()
@files_argument
@click.option('--system', 'systems', multiple=True, help='Check only this system (repeatable).')
@exploration_options
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default='human', show_default=True)
@click.option('--jobs', type=click.IntRange(min=1), default=1, show_default=True,
              help='Worker processes checking systems in parallel.')
@click.option('--show-info', is_flag=True, help='Also report informational diagnostics.')
@click.option('--compat-only', is_flag=True, help='Skip compliance checks.')
@click.option('--compliance-only', is_flag=True, help='Skip compatibility checks.')
@click.option('--color', type=click.Choice(COLOR_MODES), default='auto', show_default=True,
              envvar='OBJCHECK_COLOR', show_envvar=True)
@click.pass_context
def check(ctx, files, systems, queue_bound, max_configs, invoke_depth, fmt, jobs, show_info,
          compat_only, compliance_only, color):
    """Check every system declared in FILES."""
    if compat_only and compliance_only:
        raise click.UsageError('--compat-only and --compliance-only are mutually exclusive')
    options = Options(root_systems=tuple(systems) or None, queue_bound=queue_bound,
                      max_configs=max_configs, invoke_depth=invoke_depth, format=fmt,
                      jobs=jobs, show_info=show_info, color=color)
    workspace = load_workspace(files)
    known = set(workspace.system_names())
    for name in systems:
        if name not in known:
            raise click.BadParameter(f'no system named {name} in the workspace',
                                     param_hint="'--system'")

    report = check_workspace(workspace, options, compat=not compliance_only,
                             compliance=not compat_only)
    _emit_diagnostics(visible(report.diagnostics, show_info), workspace, fmt, color,
                      report.systems_checked)
    ctx.exit(report.exit_code)


@cli.command('simulate')
@files_argument
@click.option('--system', required=True, help='System to run.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--steps', type=click.IntRange(min=0), default=50, show_default=True)
@click.option('--queue-bound', type=click.IntRange(min=1), default=2, show_default=True)
@click.option('--format', 'fmt', type=click.Choice(FORMATS), default='human', show_default=True)
@click.pass_context
def simulate_command(ctx, files, system, seed, steps, queue_bound, fmt):
    """Run one system under a seeded random scheduler."""
    workspace = load_workspace(files)
    options = Options(queue_bound=queue_bound, seed=seed, format=fmt)
    try:
        resolved = resolve_one(workspace, system)
    except CheckError as e:
        _emit_diagnostics(e.diagnostics, workspace, fmt, 'never')
        ctx.exit(1)
    trace = simulate(resolved, seed, steps, options)
    if fmt == 'json':
        click.echo(dump_document(trace.to_dict()))
    else:
        for n, step in enumerate(trace.steps, start=1):
            click.echo(f'{n:>4}. {step.describe()}')
        final = trace.final.to_dict()
        click.echo('final:')
        for obj, where in final['objects'].items():
            click.echo(f'  {obj}: {where}')
        for channel, labels in final['queues'].items():
            click.echo(f'  {channel}: [{", ".join(labels)}]')
    ctx.exit(0)


@cli.command()
@files_argument
@click.option('--system', required=True, help='System to export.')
@click.option('--dot', 'dot_output', type=click.Path(dir_okay=False, writable=True),
              help='Write DOT here instead of standard output.')
@click.option('--observable', is_flag=True,
              help='Export the asynchronous observable LTS instead of the synchronous product.')
@exploration_options
@click.pass_context
def lts(ctx, files, system, dot_output, observable, queue_bound, max_configs, invoke_depth):
    """Export the transition system of one system as Graphviz DOT."""
    workspace = load_workspace(files)
    options = Options(queue_bound=queue_bound, max_configs=max_configs,
                      invoke_depth=invoke_depth, dot_output=dot_output)
    try:
        resolved = resolve_one(workspace, system)
        if observable:
            observed = observable_lts(resolved, options)
            lines = to_dot(observed.graph, observed.initial, system,
                           edge_label=lambda data: step_label(data['step']))
        else:
            graph, initial = system_graph(resolved, max_configs, invoke_depth)
            lines = to_dot(graph, initial, system)
        text = '\n'.join(lines) + '\n'
    except CheckError as e:
        _emit_diagnostics(e.diagnostics, workspace, 'human', 'never')
        ctx.exit(1)

    if options.dot_output:
        try:
            Path(options.dot_output).write_text(text, encoding='utf-8')
        except OSError as e:
            raise WorkspaceError(f'cannot write {options.dot_output}: {e}')
    else:
        click.echo(text, nl=False)
    ctx.exit(0)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit status."""
    try:
        return cli.main(args=list(argv) if argv is not None else None,
                        prog_name='objcheck', standalone_mode=False) or 0
    except click.exceptions.Abort:
        click.echo('Aborted!', err=True)
        return 2
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except Exception as e:
        if debug:
            traceback.print_exception(e)
        else:
            click.echo(f'objcheck: internal error: {e} (rerun with --debug for details)',
                       err=True)
        return 2


if __name__ == '__main__':
    sys.exit(run())
