"""
Model Comparison

Scores the DSD model against the two single-predictor baselines on one table:

- DSD (fitted here)
- BD, bound-wise affine model (coefficients supplied)
- VI, mean plus centered quantile model (coefficients supplied)

Each model is rated by RMSE on lower bounds, upper bounds, the Mallows RMSE and Ω.

Usage:
    histreg compare --data data.json --response Y --predictor X --bd a,b --vi a,b,c
"""

from dataclasses import asdict
from dataclasses import dataclass
from typing import Optional

from rich.console import Console
from rich.table import Table as RichTable

from histreg.core.dsd import DSDModel
from histreg.core.dsd import SymbolicTable
from histreg.core.dsd import baseline_predict_bd
from histreg.core.dsd import baseline_predict_vi
from histreg.core.dsd import fit
from histreg.core.dsd import omega
from histreg.core.dsd import predict_table
from histreg.core.metrics import VariableColumn
from histreg.core.metrics import rmse_bounds
from histreg.core.metrics import rmse_m
from histreg.exceptions import ArityMismatch
from histreg.exceptions import NumericalError


@dataclass
class ModelScore:
    """Fit quality of one model on a table"""

    model: str
    rmse_l: float
    rmse_u: float
    rmse_m: float
    omega: Optional[float]
    coefficients: dict[str, float]


class ModelComparison:
    """Evaluates the DSD model and the baselines on the same table"""

    def __init__(self, table: SymbolicTable):
        self.table = table
        self.dsd_model: Optional[DSDModel] = None

    def _score(self, name: str, predicted: VariableColumn, coefficients: dict[str, float]) -> ModelScore:
        lower, upper = rmse_bounds(self.table.response, predicted)
        try:
            goodness: Optional[float] = omega(self.table, predicted)
        except NumericalError:
            goodness = None
        return ModelScore(
            model=name,
            rmse_l=lower,
            rmse_u=upper,
            rmse_m=rmse_m(self.table.response, predicted),
            omega=goodness,
            coefficients=coefficients,
        )

    def _single_predictor(self, name: str) -> VariableColumn:
        if self.table.p != 1:
            raise ArityMismatch(f"the {name} model takes one predictor, the table has {self.table.p}")
        return self.table.predictors[0]

    def score_dsd(self, **solver_options) -> ModelScore:
        """Fit DSD on the table and score it"""
        self.dsd_model = fit(self.table, **solver_options)
        coefficients = {}
        for k, name in enumerate(self.dsd_model.predictor_names):
            coefficients[f"alpha[{name}]"] = float(self.dsd_model.alphas[k])
            coefficients[f"beta[{name}]"] = float(self.dsd_model.betas[k])
        coefficients["gamma"] = self.dsd_model.gamma
        return self._score("DSD", predict_table(self.dsd_model, self.table), coefficients)

    def score_bd(self, intercept: float, slope: float) -> ModelScore:
        """Score the bound-wise affine model with the given coefficients"""
        x = self._single_predictor("BD")
        predicted = VariableColumn.from_values([baseline_predict_bd(intercept, slope, q) for q in x])
        return self._score("BD", predicted, {"intercept": intercept, "slope": slope})

    def score_vi(self, intercept: float, slope_mean: float, slope_centered: float) -> ModelScore:
        """Score the mean plus centered quantile model with the given coefficients"""
        x = self._single_predictor("VI")
        predicted = VariableColumn.from_values(
            [baseline_predict_vi(intercept, slope_mean, slope_centered, q) for q in x]
        )
        return self._score(
            "VI",
            predicted,
            {"intercept": intercept, "slope_mean": slope_mean, "slope_centered": slope_centered},
        )

    def evaluate_all_methods(
        self,
        bd: Optional[tuple[float, float]] = None,
        vi: Optional[tuple[float, float, float]] = None,
        **solver_options,
    ) -> list[ModelScore]:
        """DSD first, then whichever baselines have coefficients"""
        scores = [self.score_dsd(**solver_options)]
        if bd is not None:
            scores.append(self.score_bd(*bd))
        if vi is not None:
            scores.append(self.score_vi(*vi))
        return scores

    @staticmethod
    def to_dict(scores: list[ModelScore]) -> list[dict]:
        return [asdict(score) for score in scores]

    def print_results(self, scores: list[ModelScore], console: Console, decimals: int = 4) -> None:
        """Render the scores as a rich table"""
        table = RichTable(
            title=f"{self.table.response_name} ~ {', '.join(self.table.predictor_names)} "
            f"({self.table.m} units)"
        )
        table.add_column("Model", style="magenta")
        table.add_column("RMSE_L", justify="right")
        table.add_column("RMSE_U", justify="right")
        table.add_column("RMSE_M", justify="right", style="green")
        table.add_column("Ω", justify="right")
        best = min(score.rmse_m for score in scores)
        for score in scores:
            table.add_row(
                f"[bold]{score.model}[/bold]" if score.rmse_m == best else score.model,
                f"{score.rmse_l:.{decimals}f}",
                f"{score.rmse_u:.{decimals}f}",
                f"{score.rmse_m:.{decimals}f}",
                "-" if score.omega is None else f"{score.omega:.{decimals}f}",
            )
        console.print(table)
