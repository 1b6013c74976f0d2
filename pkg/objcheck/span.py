"""Source positions for objects, behaviours and message labels."""

from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True, order=True)
class Span:
    """A region of one source file.

    Lines and columns are 1-based; ``end_col`` is exclusive, so a span
    covering the token ``stop`` at column 17 ends at column 21.
    """
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self):
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError(f'span ends before it starts: {self}')

    @property
    def start(self) -> Tuple[int, int]:
        return self.start_line, self.start_col

    def slice(self, text: str) -> str:
        """Return the source text this span covers."""
        lines = text.splitlines()
        if self.start_line == self.end_line:
            return lines[self.start_line - 1][self.start_col - 1:self.end_col - 1]
        head = lines[self.start_line - 1][self.start_col - 1:]
        middle = lines[self.start_line:self.end_line - 1]
        tail = lines[self.end_line - 1][:self.end_col - 1]
        return '\n'.join([head, *middle, tail])

    def to(self, other: 'Span') -> 'Span':
        """Span from the start of this span to the end of ``other``."""
        return Span(self.file, self.start_line, self.start_col,
                    other.end_line, other.end_col)

    def __str__(self) -> str:
        return f'{self.file}:{self.start_line}:{self.start_col}'
