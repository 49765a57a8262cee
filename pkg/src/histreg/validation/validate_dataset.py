"""
Dataset Validation Script

Checks a histogram-valued dataset file and lists every problem with its unit and
variable, instead of stopping at the first one like the loader does.

Usage:
    python -m histreg.validation.validate_dataset path/to/data.json
    histreg validate --data path/to/data.json
"""

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel

from histreg.core.histcore import WEIGHT_TOL
from histreg.exceptions import DatasetError
from histreg.io.dataset import DatasetFile
from histreg.io.dataset import dataset_issues
from histreg.io.dataset import parse_document
from histreg.io.dataset import unit_line


@dataclass
class DatasetIssue:
    """One problem found in a dataset"""

    severity: str  # "ERROR", "WARNING"
    message: str
    line: Optional[int] = None
    location: Optional[str] = None

    def __str__(self) -> str:
        prefix = []
        if self.line is not None:
            prefix.append(f"line {self.line}")
        if self.location:
            prefix.append(self.location)
        return f"{', '.join(prefix)}: {self.message}" if prefix else self.message


class DatasetValidator:
    """Collects errors and warnings for one dataset file"""

    def __init__(self, path: Path, console: Optional[Console] = None):
        self.path = Path(path)
        self.console = console or Console()
        self.issues: list[DatasetIssue] = []

    @property
    def errors(self) -> list[DatasetIssue]:
        return [i for i in self.issues if i.severity == "ERROR"]

    @property
    def warnings(self) -> list[DatasetIssue]:
        return [i for i in self.issues if i.severity == "WARNING"]

    def validate_all(self) -> dict:
        """Run all validation checks"""
        self.console.print("[bold cyan]Dataset Validation[/bold cyan]\n")
        self.console.print(f"File: {escape(str(self.path))}\n")

        # 1. Parse the JSON document against the schema
        parsed = self.validate_document()

        if parsed is not None:
            doc, text = parsed
            # 2. Structure and histogram invariants
            self.validate_values(doc, text)
            # 3. Values that load but deserve a look
            self.check_warnings(doc, text)

        self.print_results()
        return {
            "total_errors": len(self.errors),
            "total_warnings": len(self.warnings),
            "issues": self.issues,
        }

    def validate_document(self) -> Optional[tuple[DatasetFile, str]]:
        """Read and schema-check the file"""
        self.console.print("[bold]1. Parsing document[/bold]")
        try:
            text = self.path.read_text(encoding="utf-8")
            doc = parse_document(text, str(self.path))
        except OSError as exc:
            self.issues.append(DatasetIssue("ERROR", f"cannot read file: {exc.strerror or exc}"))
        except DatasetError as exc:
            self.issues.append(DatasetIssue("ERROR", exc.message, exc.line, exc.location))
        else:
            self.console.print(
                f"  [green]✓ {len(doc.units)} units, {len(doc.variables)} variables[/green]\n"
            )
            return doc, text
        self.console.print("  [red]❌ cannot be parsed[/red]\n")
        return None

    def validate_values(self, doc: DatasetFile, text: str) -> None:
        """Every unit defines every variable with a valid histogram"""
        self.console.print("[bold]2. Validating histogram values[/bold]")
        found = dataset_issues(doc, text)
        for problem in found:
            self.issues.append(DatasetIssue("ERROR", problem.message, problem.line, problem.location))
        if found:
            self.console.print(f"  [red]❌ {len(found)} invalid entries[/red]\n")
        else:
            self.console.print("  [green]✓ All histograms valid[/green]\n")

    def check_warnings(self, doc: DatasetFile, text: str) -> None:
        """Zero or negligible weight bins and single-value bins"""
        self.console.print("[bold]3. Checking for unusual values[/bold]")
        count = 0
        for unit in doc.units:
            line = unit_line(text, unit.label)
            for name, value in unit.values.items():
                location = f"unit {unit.label!r} / variable {name!r}"
                for i, ((lower, upper), weight) in enumerate(zip(value.bins, value.weights)):
                    if weight == 0:
                        self.issues.append(
                            DatasetIssue("WARNING", f"bin {i} has zero weight and is ignored", line, location)
                        )
                        count += 1
                    elif weight <= WEIGHT_TOL:
                        self.issues.append(
                            DatasetIssue(
                                "WARNING", f"bin {i} has negligible weight {weight} and is ignored", line, location
                            )
                        )
                        count += 1
                    elif lower == upper:
                        self.issues.append(
                            DatasetIssue("WARNING", f"bin {i} is a single value {lower}", line, location)
                        )
                        count += 1
        if count:
            self.console.print(f"  [yellow]⚠️  {count} warnings[/yellow]\n")
        else:
            self.console.print("  [green]✓ Nothing unusual[/green]\n")

    def print_results(self) -> None:
        """Print validation summary"""
        errors = self.errors
        warnings = self.warnings

        summary_text = f"""
[bold]Validation Summary[/bold]

{len(errors)} issues
  • [red]Errors: {len(errors)}[/red]
  • [yellow]Warnings: {len(warnings)}[/yellow]
"""
        if errors:
            summary_text += "\n[red]⚠️  Dataset cannot be loaded[/red]"
        elif warnings:
            summary_text += "\n[yellow]⚠️  Warnings found - Review recommended[/yellow]"
        else:
            summary_text += "\n[green]✅ All validation checks passed![/green]"
        self.console.print(Panel(summary_text, border_style="cyan"))

        if errors:
            self.console.print("\n[bold red]ERRORS:[/bold red]")
            for error in errors:
                self.console.print(f"  • {escape(str(error))}", soft_wrap=True)
        if warnings:
            self.console.print("\n[bold yellow]WARNINGS:[/bold yellow]")
            for warning in warnings[:20]:
                self.console.print(f"  • {escape(str(warning))}", soft_wrap=True)
            if len(warnings) > 20:
                self.console.print(f"  [dim]... and {len(warnings) - 20} more warnings[/dim]")


def main(argv: Optional[list[str]] = None) -> int:
    """Validate the dataset named on the command line"""
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1:
        Console(stderr=True).print("[red]Usage: python -m histreg.validation.validate_dataset FILE[/red]")
        return 2
    results = DatasetValidator(Path(args[0])).validate_all()
    return 1 if results["total_errors"] else 0


if __name__ == "__main__":
    exit(main() or 0)
