"""Multi-variable LSTM: per-variable hidden state, variable attention, BPTT training."""

from .attention import AttentionOutput, attention_forward, rank_variables
from .cell import (
    CellShape,
    ForwardTape,
    MvLstmParams,
    cell_candidate,
    cell_gates,
    cell_step,
    flatten,
    network_forward,
    unflatten,
)
from .data import SeriesFrame, read_csv, write_csv
from .grad import backward, fd_check
from .granger import GrangerResult, granger_rank, granger_test, ols
from .synth import ArxSpec, ExoProcess, TanhTerm, generate, ground_truth_rank
from .train import FitResult, TrainConfig, WindowedDataset, fit, mae, make_windows, rmse

__version__ = "0.1.0"
