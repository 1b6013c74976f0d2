"""
Name resolution across a workspace.

A system owns the objects it declares plus, transitively, the objects of
every system it names with ``using``. Names it mentions without owning
them are its external participants.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from objcheck.diagnostics import Diagnostic, DiagnosticKind, ResolveError, sort_diagnostics
from objcheck.span import Span
from objcheck.syntax import ObjectDecl, SystemDecl

logger = logging.getLogger(__name__)

COMMAND_LINE = Span('<command line>', 1, 1, 1, 1)


@dataclass(frozen=True)
class ResolvedSystem:
    """A system with its imports flattened.

    ``objects`` keeps declaration order: the system's own objects first,
    then those of each ``using`` in turn.
    """
    name: str
    decl: SystemDecl
    objects: Dict[str, ObjectDecl] = field(hash=False)
    externals: FrozenSet[str] = frozenset()
    parent: Optional['ResolvedSystem'] = None
    owners: Dict[str, str] = field(default_factory=dict, hash=False, compare=False)

    @property
    def members(self) -> Tuple[str, ...]:
        return tuple(sorted(self.objects))

    def owner(self, obj: str) -> str:
        """Name of the system that declares ``obj``."""
        return self.owners.get(obj, self.name)


def index_systems(decls: Sequence[SystemDecl]) -> Tuple[Dict[str, SystemDecl], List[Diagnostic]]:
    """Map system names to declarations, reporting every name declared twice."""
    by_name: Dict[str, List[SystemDecl]] = {}
    for decl in decls:
        by_name.setdefault(decl.name, []).append(decl)

    index, diags = {}, []
    for name, found in by_name.items():
        found = sorted(found, key=lambda d: d.span)
        index[name] = found[0]
        for dup in found[1:]:
            diags.append(Diagnostic(
                DiagnosticKind.DUPLICATE_SYSTEM, dup.span,
                f'system {name} is already declared', name,
                related=(found[0].span,)))
    return index, diags


def _collect(index: Dict[str, SystemDecl], root: SystemDecl,
             diags: List[Diagnostic]) -> List[SystemDecl]:
    """Systems reachable from ``root`` through ``using``, root first, each once."""
    order: List[SystemDecl] = []
    done = set()

    def visit(decl: SystemDecl, trail: List[str]) -> None:
        if decl.name in done:
            return
        done.add(decl.name)
        order.append(decl)
        for name, span in zip(decl.usings, decl.using_spans or [decl.span] * len(decl.usings)):
            if name in trail or name == decl.name:
                cycle = ' -> '.join(trail + [decl.name, name])
                diags.append(Diagnostic(
                    DiagnosticKind.IMPORT_CYCLE, span,
                    f'import cycle {cycle}', root.name))
                continue
            target = index.get(name)
            if target is None:
                diags.append(Diagnostic(
                    DiagnosticKind.UNKNOWN_SYSTEM, span,
                    f'no system named {name} in the workspace', root.name))
                continue
            visit(target, trail + [decl.name])

    visit(root, [])
    return order


def _flatten(root: SystemDecl, systems: List[SystemDecl],
             diags: List[Diagnostic]) -> Tuple[Dict[str, ObjectDecl], Dict[str, str]]:
    objects: Dict[str, ObjectDecl] = {}
    owners: Dict[str, str] = {}
    for decl in systems:
        for obj in decl.objects:
            first = objects.get(obj.name)
            if first is None:
                objects[obj.name] = obj
                owners[obj.name] = decl.name
            elif first is not obj:
                earlier, later = sorted([first, obj], key=lambda o: o.span)
                diags.append(Diagnostic(
                    DiagnosticKind.DUPLICATE_OBJECT, later.span,
                    f'object {obj.name} is declared by both {owners[obj.name]} and {decl.name}',
                    root.name, related=(earlier.span,)))
    return objects, owners


def resolve(decls: Sequence[SystemDecl], root: str,
            _refining: Tuple[str, ...] = ()) -> ResolvedSystem:
    """Resolve ``root`` against every declaration in the workspace

    Parameters
    ----------
    decls : Sequence[SystemDecl]
        Every system declared in the workspace, in any order
    root : str
        Name of the system to resolve

    Returns
    -------
    ResolvedSystem
        The flattened system, with its parent resolved too

    Raises
    ------
    ResolveError
        On unknown, duplicate or cyclic system names and on objects
        declared by two imported systems
    """
    index, duplicates = index_systems(decls)
    decl = index.get(root)
    if decl is None:
        raise ResolveError([Diagnostic(
            DiagnosticKind.UNKNOWN_SYSTEM, COMMAND_LINE,
            f'no system named {root} in the workspace')])
    diags: List[Diagnostic] = []
    systems = _collect(index, decl, diags)
    involved = {s.name for s in systems}
    diags.extend(d for d in duplicates if d.system in involved)
    objects, owners = _flatten(decl, systems, diags)

    parent = None
    if decl.parent is not None:
        where = decl.parent_span or decl.span
        if decl.parent in _refining + (root,):
            chain = ' -> '.join(_refining + (root, decl.parent))
            diags.append(Diagnostic(
                DiagnosticKind.IMPORT_CYCLE, where,
                f'refinement cycle {chain}', root))
        elif decl.parent not in index:
            diags.append(Diagnostic(
                DiagnosticKind.UNKNOWN_SYSTEM, where,
                f'{root} refines {decl.parent}, which is not in the workspace', root))
        else:
            try:
                parent = resolve(decls, decl.parent, _refining + (root,))
            except ResolveError as e:
                diags.extend(e.diagnostics)

    if diags:
        raise ResolveError(sort_diagnostics(diags))

    mentioned = set()
    for obj in objects.values():
        mentioned |= obj.peers()
    externals = frozenset(mentioned - set(objects))
    logger.debug('resolved %s: members %s, externals %s',
                 root, sorted(objects), sorted(externals))
    return ResolvedSystem(root, decl, objects, externals, parent, owners)
