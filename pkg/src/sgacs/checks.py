"""Pass/fail records shared by the validators and the variational oracle."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    note: str = ""


@dataclass
class CheckReport:
    checks: list[Check]
    fields: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __iter__(self):
        return iter(self.checks)

    def to_csv(self) -> str:
        """``check,residual,tolerance,pass`` rows."""
        rows = ["check,residual,tolerance,pass"]
        rows += [f"{c.name},{c.value!r},{c.tolerance!r},{'pass' if c.passed else 'fail'}" for c in self.checks]
        return "\n".join(rows) + "\n"
