from .dados import chronological_split, fit_scaler, load_csv, make_windows, synthetic_benchmark
from .detector_csv import DetectorCSV
from .modelo import WDformerParameters, forward, forward_ablated, inicializar_parametros
from .salvadores import Salvadores, carregar_checkpoint
from .tipos import ModelConfig, RunReport, TimeSeriesDataset, TrainConfig
from .treino import evaluate, naive_baseline, run_ablation, train

__all__ = [
    'DetectorCSV',
    'ModelConfig',
    'RunReport',
    'Salvadores',
    'TimeSeriesDataset',
    'TrainConfig',
    'WDformerParameters',
    'carregar_checkpoint',
    'chronological_split',
    'evaluate',
    'fit_scaler',
    'forward',
    'forward_ablated',
    'inicializar_parametros',
    'load_csv',
    'make_windows',
    'naive_baseline',
    'run_ablation',
    'synthetic_benchmark',
    'train',
]
