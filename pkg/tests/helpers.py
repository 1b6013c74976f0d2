"""Loading of the .obj fixtures shared by the unit tests."""

from pathlib import Path

from objcheck.objcheck import Workspace, load_workspace
from objcheck.resolve import ResolvedSystem, resolve

FIXTURES = Path(__file__).parent / 'fixtures'


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def workspace_of(*names: str) -> Workspace:
    return load_workspace([fixture_path(n) for n in names])


def system_of(name: str, *files: str) -> ResolvedSystem:
    workspace = workspace_of(*files)
    assert not workspace.diagnostics
    return resolve(workspace.decls, name)


def source_of(name: str) -> str:
    return (FIXTURES / name).read_text(encoding='utf-8')
