from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from qcbm_loader.models.schemas import BaeSummaryRow, MarginalSet, MetricsSummary, StageReport
from qcbm_loader.services.analysis import ReadoutResult, ShotCounts
from qcbm_loader.services.circuit import ParameterizedCircuit, count_single_qubit_gates, count_two_qubit_gates
from qcbm_loader.services.distribution import (
    ProbabilityVector,
    bitstring_of_index,
    classical_fidelity,
    kl_divergence,
    tvd,
)
from qcbm_loader.services.training import BaeResult


class ReportService:
    """
    Turns training and analysis results into summaries and tables
    """

    def metrics_summary(
        self,
        mode: str,
        circuit: ParameterizedCircuit,
        target: ProbabilityVector,
        model: ProbabilityVector,
    ) -> MetricsSummary:
        """
        Full-resolution metrics of a trained model.

        Args:
            mode: hierarchical, flat or bae
            circuit: Trained circuit
            target: Image distribution
            model: Born distribution of the trained circuit

        Returns:
            MetricsSummary object
        """
        n = target.num_qubits
        return MetricsSummary(
            mode=mode,
            num_qubits=circuit.num_qubits,
            num_params=circuit.num_params,
            two_qubit_gates=count_two_qubit_gates(circuit),
            single_qubit_gates=count_single_qubit_gates(circuit),
            kl=kl_divergence(target, model, n),
            tvd=tvd(target, model, n),
            fidelity=classical_fidelity(target, model, n),
        )

    def resolution_rows(
        self,
        target: ProbabilityVector,
        model: ProbabilityVector,
        resolutions: Sequence[int],
    ) -> List[Dict[str, float]]:
        """KL_m, TVD_m and F_m for each requested resolution m"""
        return [
            {
                "m": m,
                "kl": kl_divergence(target, model, m),
                "tvd": tvd(target, model, m),
                "fidelity": classical_fidelity(target, model, m),
            }
            for m in resolutions
        ]

    def loss_frame(self, reports: Sequence[StageReport]) -> pd.DataFrame:
        """
        One row per evaluated iteration: global iteration, stage, stage
        iteration, KL at stage resolution, TVD at full resolution
        """
        rows = []
        offset = 0
        for report in reports:
            for step, (kl, tvd_full) in enumerate(zip(report.loss_trace, report.tvd_trace)):
                rows.append({
                    "iteration": offset + step,
                    "stage": report.stage,
                    "stage_iteration": step,
                    "kl": kl,
                    "tvd_full": tvd_full,
                })
            offset += len(report.loss_trace)
        return pd.DataFrame(rows, columns=["iteration", "stage", "stage_iteration", "kl", "tvd_full"])

    def counts_frame(self, counts: ShotCounts) -> pd.DataFrame:
        rows = [
            {
                "index": index,
                "bitstring": "".join(str(bit) for bit in bitstring_of_index(index, counts.num_qubits)),
                "count": count,
            }
            for index, count in sorted(counts.counts.items())
        ]
        return pd.DataFrame(rows, columns=["index", "bitstring", "count"])

    def counts_from_frame(self, frame: pd.DataFrame, num_qubits: int) -> ShotCounts:
        """Inverse of counts_frame; also reads measured counts files with the same columns"""
        values = np.zeros(1 << num_qubits, dtype=np.int64)
        for index, count in zip(frame["index"], frame["count"]):
            values[int(index)] += int(count)
        return ShotCounts.from_array(num_qubits, values)

    def marginal_frame(self, label: str, marginals: MarginalSet) -> pd.DataFrame:
        ideal = marginals.ideal if marginals.ideal is not None else [np.nan] * len(marginals.subset)
        return pd.DataFrame({
            "checkpoint": label,
            "qubit": marginals.subset,
            "P": marginals.estimates,
            "P_ideal": ideal,
        })

    def analysis_frame(self, rows: Sequence[Dict[str, object]]) -> pd.DataFrame:
        """Per-checkpoint L1 rows ordered by two-qubit gate count"""
        frame = pd.DataFrame(list(rows))
        return frame.sort_values("two_qubit_gates", kind="stable").reset_index(drop=True)

    def readout_frames(self, results: Sequence[Tuple[str, int, ReadoutResult]]) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """
        Readout-learning outcome per (checkpoint, qubit) and the <Z> trace behind it

        Returns:
            (summary frame, trace frame)
        """
        summary, trace = [], []
        for label, qubit, result in results:
            summary.append({
                "checkpoint": label,
                "qubit": qubit,
                "z_initial": result.initial_value,
                "z_final": result.value,
                "iterations": result.iterations,
                "converged": result.converged,
                "params": result.circuit.num_params,
            })
            trace.extend(
                {"checkpoint": label, "qubit": qubit, "iteration": step, "z": value}
                for step, value in enumerate(result.trace)
            )
        return (
            pd.DataFrame(summary, columns=["checkpoint", "qubit", "z_initial", "z_final", "iterations", "converged", "params"]),
            pd.DataFrame(trace, columns=["checkpoint", "qubit", "iteration", "z"]),
        )

    def bae_summary_row(self, result: BaeResult) -> BaeSummaryRow:
        return BaeSummaryRow(
            blocks=len(result.outcomes),
            qubits_per_block=result.qubits_per_block,
            total_qubits=result.total_qubits,
            total_params=result.total_params,
            tvd=result.assembled_tvd,
        )

    def summary_frame(self, rows: Sequence[BaeSummaryRow]) -> pd.DataFrame:
        """Table with columns #blocks, qubits/block, total qubits, total params, TVD"""
        return pd.DataFrame([row.model_dump(by_alias=True) for row in rows])
