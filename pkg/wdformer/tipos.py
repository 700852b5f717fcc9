"""Tipos de dados e estruturas do WDformer."""

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .config import FAMILIAS_WAVELET, PASTA_SAIDA_PADRAO, VARIANTES


@dataclass(frozen=True)
class WaveletFilter:
    """Par de filtros ortonormais de análise (correlação, passo 2)."""

    name: str
    lowpass: np.ndarray
    highpass: np.ndarray

    def violacoes(self, tolerancia: float = 1e-12) -> list[str]:
        """Lista as propriedades de ortonormalidade que o par não satisfaz."""
        g, h = self.lowpass, self.highpass
        problemas: list[str] = []
        if len(g) != len(h):
            problemas.append('filtros com comprimentos diferentes')
            return problemas
        if abs(g.sum() - np.sqrt(2.0)) > tolerancia:
            problemas.append(f'soma do passa-baixa {g.sum():.15f} != sqrt(2)')
        espelho = np.array([(-1) ** k * g[len(g) - 1 - k] for k in range(len(g))])
        if np.max(np.abs(espelho - h)) > tolerancia:
            problemas.append('relação de espelho em quadratura violada')
        if abs(g @ g - 1.0) > tolerancia:
            problemas.append(f'<g,g> = {g @ g:.15f}')
        if abs(g @ h) > tolerancia:
            problemas.append(f'<g,h> = {g @ h:.3e}')
        return problemas


@dataclass
class WaveletCoefficients:
    """Conjuntos ``[aprox_L, detalhe_L, ..., detalhe_1]`` de uma DWT de L níveis."""

    levels: int
    sets: list[np.ndarray]
    original_length: int

    @property
    def comprimentos(self) -> list[int]:
        return [conjunto.shape[-1] for conjunto in self.sets]

    def energia(self) -> float:
        return float(sum(np.sum(conjunto**2) for conjunto in self.sets))


@dataclass
class ModelConfig:
    """Hiperparâmetros do modelo."""

    K: int = 96
    F: int = 96
    N: int = 1
    L: int = 1
    d: int = 64
    h: int = 4
    e_layers: int = 2
    d_ff: int = 128
    dropout: float = 0.1
    wavelet_family: str = 'haar'
    instance_norm: bool = True
    seed: int = 2024
    variant: str = 'full'
    padding: bool = True

    @property
    def passo(self) -> int:
        return 2**self.L

    @property
    def K_efetivo(self) -> int:
        return -(-self.K // self.passo) * self.passo

    @property
    def F_efetivo(self) -> int:
        return -(-self.F // self.passo) * self.passo

    @property
    def d_h(self) -> int:
        return self.d // self.h

    @property
    def usa_wavelet(self) -> bool:
        return self.variant in ('full', 'no_diff')

    @property
    def usa_diferencial(self) -> bool:
        return self.variant in ('full', 'no_wave')

    def validar(self) -> list[str]:
        violacoes: list[str] = []
        for nome in ('K', 'F', 'N', 'L', 'd', 'h', 'e_layers', 'd_ff'):
            if getattr(self, nome) < 1:
                violacoes.append(f'model.{nome} deve ser >= 1')
        if violacoes:
            return violacoes
        if self.d % self.h != 0:
            violacoes.append(f'model.d={self.d} não é divisível por model.h={self.h}')
        elif self.d_h < 2:
            violacoes.append(f'model.d/model.h={self.d_h} deve ser >= 2')
        if self.d < self.L + 1:
            violacoes.append(f'model.d={self.d} deve ser >= model.L+1={self.L + 1}')
        if not 0.0 <= self.dropout < 1.0:
            violacoes.append(f'model.dropout={self.dropout} fora de [0, 1)')
        if self.wavelet_family not in FAMILIAS_WAVELET:
            violacoes.append(f'model.wavelet_family={self.wavelet_family!r} não está em {FAMILIAS_WAVELET}')
        if self.variant not in VARIANTES:
            violacoes.append(f'model.variant={self.variant!r} não está em {VARIANTES}')
        if not self.padding:
            for nome in ('K', 'F'):
                if getattr(self, nome) % self.passo != 0:
                    violacoes.append(f'model.{nome}={getattr(self, nome)} não é divisível por 2^L={self.passo} e model.padding está desligado')
        comprimento_filtro = 4 if self.wavelet_family == 'db2' else 2
        menor_nivel = min(self.K_efetivo, self.F_efetivo) // 2 ** (self.L - 1)
        if self.wavelet_family in FAMILIAS_WAVELET and menor_nivel < comprimento_filtro:
            violacoes.append(f'nível mais grosso com {menor_nivel} amostras é menor que o filtro {self.wavelet_family}')
        return violacoes

    def como_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainConfig:
    """Parâmetros de otimização e de protocolo de avaliação."""

    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    early_stop_patience: int = 3
    gradient_clip_norm: float | None = None
    seed: int = 2024
    horizons: list[int] = field(default_factory=list)
    metrics_original_units: bool = False
    progress: bool = True

    def validar(self) -> list[str]:
        violacoes: list[str] = []
        if self.epochs < 1:
            violacoes.append('train.epochs deve ser >= 1')
        if self.batch_size < 1:
            violacoes.append('train.batch_size deve ser >= 1')
        if self.learning_rate <= 0:
            violacoes.append('train.learning_rate deve ser > 0')
        if self.early_stop_patience < 0:
            violacoes.append('train.early_stop_patience deve ser >= 0')
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            violacoes.append('train.beta1 e train.beta2 devem estar em [0, 1)')
        if self.eps <= 0:
            violacoes.append('train.eps deve ser > 0')
        if self.gradient_clip_norm is not None and self.gradient_clip_norm <= 0:
            violacoes.append('train.gradient_clip_norm deve ser > 0 quando definido')
        if any(horizonte < 1 for horizonte in self.horizons):
            violacoes.append('train.horizons deve conter apenas inteiros >= 1')
        return violacoes

    def como_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class DataConfig:
    """Origem dos dados e política de leitura do CSV."""

    path: str | None = None
    delimiter: str | None = None
    timestamp: bool | None = None
    header: bool | None = None
    nan_policy: str = 'drop'
    synthetic: bool = False

    def validar(self) -> list[str]:
        violacoes: list[str] = []
        if self.nan_policy not in ('drop', 'fail'):
            violacoes.append(f'data.nan_policy={self.nan_policy!r} deve ser drop ou fail')
        if self.path is None and not self.synthetic:
            violacoes.append('data.path ausente (ou use --synthetic)')
        return violacoes


@dataclass
class CliConfig:
    """Visão consolidada de modelo, treino, dados e pasta de saída."""

    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    out_dir: str = PASTA_SAIDA_PADRAO

    def validar(self, exigir_dados: bool = True) -> list[str]:
        violacoes = self.model.validar() + self.train.validar()
        if exigir_dados:
            violacoes += self.data.validar()
        return violacoes


@dataclass
class TimeSeriesDataset:
    """Série multivariada ``values[T×N]`` com nomes de variáveis."""

    name: str
    values: np.ndarray
    variate_names: list[str]
    timestamps: list[str] | None = None

    @property
    def T(self) -> int:
        return int(self.values.shape[0])

    @property
    def N(self) -> int:
        return int(self.values.shape[1])

    def recortar(self, inicio: int, fim: int, sufixo: str) -> 'TimeSeriesDataset':
        return TimeSeriesDataset(
            name=f'{self.name}:{sufixo}',
            values=self.values[inicio:fim],
            variate_names=list(self.variate_names),
            timestamps=self.timestamps[inicio:fim] if self.timestamps is not None else None,
        )


@dataclass
class WindowSample:
    """Janela de retrospecção ``x[N×K]`` seguida imediatamente pelo alvo ``y[N×F]``."""

    x: np.ndarray
    y: np.ndarray
    inicio: int = 0


@dataclass
class Scaler:
    """Média e desvio padrão populacional por variável, ajustados só no treino."""

    mean: np.ndarray
    std: np.ndarray

    def aplicar(self, valores: np.ndarray) -> np.ndarray:
        return (valores - self.mean) / self.std

    def inverter(self, valores: np.ndarray) -> np.ndarray:
        return valores * self.std + self.mean

    def aplicar_janela(self, janela: np.ndarray) -> np.ndarray:
        """Escala arranjos com variáveis no penúltimo eixo (``[..., N, tempo]``)."""
        return (janela - self.mean[:, None]) / self.std[:, None]

    def inverter_janela(self, janela: np.ndarray) -> np.ndarray:
        return janela * self.std[:, None] + self.mean[:, None]


@dataclass
class ForecastReport:
    """Métricas de um horizonte com as séries previstas e verdadeiras."""

    horizon: int
    mse: float
    mae: float
    predictions: np.ndarray
    truths: np.ndarray


@dataclass
class RunReport:
    """Resultado de uma execução de treino + avaliação."""

    variant: str
    horizon: int
    seed: int
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float('inf')
    test_mse: float = float('nan')
    test_mae: float = float('nan')
    baseline_mse: float = float('nan')
    baseline_mae: float = float('nan')
    config: dict[str, Any] = field(default_factory=dict)
