"""Checker options shared by the command line, the library and the service."""

from dataclasses import dataclass, fields
from typing import Dict, Optional, Tuple

FORMATS = ('human', 'json')
COLOR_MODES = ('auto', 'always', 'never')


@dataclass(frozen=True)
class Options:
    """Options for a workspace check

    Parameters
    ----------
    root_systems : Optional[Tuple[str, ...]]
        Systems to check; by default every system in the workspace. A list
        is accepted and stored as a tuple
    queue_bound : int
        Capacity k of every internal FIFO channel, by default 2
    max_configs : int
        Cap on explored configurations (and on product states), by default 100000
    invoke_depth : int
        Longest chain of behaviour invocations without an action, by default 1000
    format : str
        'human' or 'json'
    seed : int
        Seed for the simulation scheduler
    dot_output : Optional[str]
        Where `lts` writes its DOT file
    jobs : int
        Worker processes used to check systems in parallel, by default 1
    show_info : bool
        Also report informational diagnostics
    color : str
        'auto', 'always' or 'never'
    """
    root_systems: Optional[Tuple[str, ...]] = None
    queue_bound: int = 2
    max_configs: int = 100000
    invoke_depth: int = 1000
    format: str = 'human'
    seed: int = 0
    dot_output: Optional[str] = None
    jobs: int = 1
    show_info: bool = False
    color: str = 'auto'

    def __post_init__(self):
        if self.root_systems is not None:
            if not isinstance(self.root_systems, (list, tuple)) or not all(
                    isinstance(name, str) for name in self.root_systems):
                raise ValueError('root_systems must be a list of system names')
            object.__setattr__(self, 'root_systems', tuple(self.root_systems))
        for name in ('queue_bound', 'max_configs', 'invoke_depth', 'jobs'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be a positive integer')
        if self.format not in FORMATS:
            raise ValueError(f'format must be one of {", ".join(FORMATS)}')
        if self.color not in COLOR_MODES:
            raise ValueError(f'color must be one of {", ".join(COLOR_MODES)}')

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> 'Options':
        """Build options from a JSON object, ignoring unknown keys."""
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in (data or {}).items() if k in known})
