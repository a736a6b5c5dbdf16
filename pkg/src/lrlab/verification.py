"""Pass/fail records shared by every structure check."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Check:
    name: str
    passed: bool
    scope: str = "full"
    witnesses: list = field(default_factory=list)
    failures: int = 0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "scope": self.scope,
            "failures": self.failures,
            "witnesses": self.witnesses,
        }


@dataclass
class VerificationReport:
    subject: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __bool__(self) -> bool:
        return self.passed

    def add(self, name: str, witnesses: list, scope: str = "full", cap: int = 10, total: int | None = None) -> Check:
        total = len(witnesses) if total is None else total
        check = Check(name, total == 0, scope, list(witnesses[:cap]), total)
        self.checks.append(check)
        return check

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failing(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {"subject": self.subject, "passed": self.passed, "checks": [c.to_json() for c in self.checks]}
