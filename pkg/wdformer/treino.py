"""Laço de otimização, parada antecipada, avaliação, baseline ingênuo e ablação."""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd  # type: ignore[import]
import psutil  # type: ignore[import]
from tqdm import tqdm  # type: ignore[import]

from .config import LIMITE_DIVERGENCIA, MAX_THREADS_ABLACAO, VARIANTES
from .dados import chronological_split, fit_scaler, mae, make_windows, mse, stack_windows
from .erros import ErroConfiguracao, ErroDados, ErroNumerico
from .modelo import WDformerParameters, copiar_parametros, forward_ablated, inicializar_parametros, named_parameters
from .numerics import AutodiffTape, TensorNode, backward, mse_loss
from .tipos import ForecastReport, ModelConfig, RunReport, Scaler, TimeSeriesDataset, TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class EstadoAdam:
    """Momentos de primeira e segunda ordem por caminho de parâmetro."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


@dataclass
class DadosPreparados:
    """Segmentos já escalados e empilhados em janelas ``X[B×N×K]``, ``Y[B×N×F]``."""

    scaler: Scaler
    treino: tuple[np.ndarray, np.ndarray]
    validacao: tuple[np.ndarray, np.ndarray]
    teste: tuple[np.ndarray, np.ndarray]


def adam_step(
    params: list[tuple[str, TensorNode]],
    grads: dict[str, np.ndarray],
    state: EstadoAdam,
    t: int,
    cfg: TrainConfig,
) -> EstadoAdam:
    """Atualização de Adam com correção de viés; recorte opcional pela norma global antes do passo."""
    if t < 1:
        raise ValueError(f'passo t={t} deve ser >= 1')
    for nome, gradiente in grads.items():
        if not np.all(np.isfinite(gradiente)):
            logger.error(f'Gradiente não finito em {nome}')
            raise ErroNumerico(f'gradiente NaN/Inf no parâmetro {nome}')

    escala = 1.0
    if cfg.gradient_clip_norm is not None:
        norma = float(np.sqrt(sum(np.sum(gradiente**2) for gradiente in grads.values())))
        if norma > cfg.gradient_clip_norm:
            escala = cfg.gradient_clip_norm / norma

    correcao_1 = 1.0 - cfg.beta1**t
    correcao_2 = 1.0 - cfg.beta2**t
    for nome, no in params:
        gradiente = grads.get(nome)
        if gradiente is None:
            gradiente = np.zeros_like(no.values)
        gradiente = gradiente * escala
        m = state.m.get(nome, np.zeros_like(no.values))
        v = state.v.get(nome, np.zeros_like(no.values))
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * gradiente
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * gradiente * gradiente
        state.m[nome], state.v[nome] = m, v
        no.values -= cfg.learning_rate * (m / correcao_1) / (np.sqrt(v / correcao_2) + cfg.eps)
    state.t = t
    return state


def preparar_dados(ds: TimeSeriesDataset, cfg: ModelConfig, scaler: Scaler | None = None) -> DadosPreparados:
    """Divide 7:1:2, ajusta o escalador no treino (salvo se já vier um) e monta as janelas de cada segmento."""
    treino, validacao, teste = chronological_split(ds, K=cfg.K, F=cfg.F)
    scaler = scaler or fit_scaler(treino)
    segmentos = []
    for segmento in (treino, validacao, teste):
        janelas = make_windows(scaler.aplicar(segmento.values), cfg.K, cfg.F)
        if not janelas:
            raise ErroConfiguracao(f'segmento {segmento.name} sem janelas para K={cfg.K}, F={cfg.F}')
        segmentos.append(stack_windows(janelas))
    logger.info(f'Janelas: treino={len(segmentos[0][0])}, validação={len(segmentos[1][0])}, teste={len(segmentos[2][0])}')
    return DadosPreparados(scaler=scaler, treino=segmentos[0], validacao=segmentos[1], teste=segmentos[2])


def prever(params: WDformerParameters, cfg: ModelConfig, X: np.ndarray, tamanho_lote: int = 256) -> np.ndarray:
    """Previsões em modo de avaliação (sem dropout e fora de qualquer fita)."""
    partes = [
        forward_ablated(X[inicio : inicio + tamanho_lote], params, cfg, cfg.variant).values
        for inicio in range(0, len(X), tamanho_lote)
    ]
    return np.concatenate(partes, axis=0)


def passo_treino(
    params: WDformerParameters,
    nomeados: list[tuple[str, TensorNode]],
    X: np.ndarray,
    Y: np.ndarray,
    cfg: ModelConfig,
    cfg_treino: TrainConfig,
    estado: EstadoAdam,
    rng: np.random.Generator,
) -> float:
    for _, no in nomeados:
        no.zerar_grad()
    with AutodiffTape():
        perda = mse_loss(forward_ablated(X, params, cfg, cfg.variant, treinando=True, rng=rng), Y)
        backward(perda)
    valor = float(perda.values)
    if not np.isfinite(valor) or valor > LIMITE_DIVERGENCIA:
        logger.error(f'Perda divergente no passo {estado.t + 1}: {valor}')
        raise ErroNumerico(f'perda divergente ({valor}) no passo {estado.t + 1}')
    adam_step(nomeados, {nome: no.grad for nome, no in nomeados if no.grad is not None}, estado, estado.t + 1, cfg_treino)
    return valor


def _perda_avaliacao(params: WDformerParameters, cfg: ModelConfig, janelas: tuple[np.ndarray, np.ndarray]) -> float:
    X, Y = janelas
    return mse(prever(params, cfg, X), Y)


def train(
    cfg: ModelConfig,
    cfg_treino: TrainConfig,
    dataset: TimeSeriesDataset,
    dados: DadosPreparados | None = None,
) -> tuple[WDformerParameters, RunReport, DadosPreparados]:
    """Minimiza o MSE no domínio do tempo, com parada antecipada e restauração do melhor ponto de validação."""
    violacoes = cfg.validar() + cfg_treino.validar()
    if violacoes:
        raise ErroConfiguracao(violacoes)
    cfg = replace(cfg, N=dataset.N)
    dados = dados or preparar_dados(dataset, cfg)

    params = inicializar_parametros(cfg)
    nomeados = named_parameters(params)
    estado = EstadoAdam()
    rng = np.random.default_rng(cfg_treino.seed)
    relatorio = RunReport(
        variant=cfg.variant,
        horizon=cfg.F,
        seed=cfg_treino.seed,
        config={'model': cfg.como_dict(), 'train': cfg_treino.como_dict()},
    )

    X, Y = dados.treino
    melhor = copiar_parametros(params)
    sem_melhora = 0
    for epoca in range(1, cfg_treino.epochs + 1):
        inicio = time.perf_counter()
        ordem = rng.permutation(len(X))
        lotes = [ordem[i : i + cfg_treino.batch_size] for i in range(0, len(ordem), cfg_treino.batch_size)]
        perdas: list[float] = []
        for indices in tqdm(lotes, desc=f'[{cfg.variant}] época {epoca}', disable=None if cfg_treino.progress else True, leave=False):
            perdas.append(passo_treino(params, nomeados, X[indices], Y[indices], cfg, cfg_treino, estado, rng))

        perda_validacao = _perda_avaliacao(params, cfg, dados.validacao)
        relatorio.train_losses.append(float(np.mean(perdas)))
        relatorio.val_losses.append(perda_validacao)
        relatorio.epoch_seconds.append(time.perf_counter() - inicio)
        logger.info(
            f'[{cfg.variant} F={cfg.F}] época {epoca}: treino={relatorio.train_losses[-1]:.6f} '
            f'validação={perda_validacao:.6f} ({relatorio.epoch_seconds[-1]:.1f}s)'
        )

        if perda_validacao < relatorio.best_val_loss:
            relatorio.best_val_loss = perda_validacao
            relatorio.best_epoch = epoca
            melhor = copiar_parametros(params)
            sem_melhora = 0
        else:
            sem_melhora += 1
            if sem_melhora >= cfg_treino.early_stop_patience:
                logger.info(f'Parada antecipada após {sem_melhora} época(s) sem melhora na validação')
                break

    params = melhor
    relatorio.test_mse, relatorio.test_mae = evaluate(params, dados, cfg, cfg_treino.metrics_original_units)
    relatorio.baseline_mse, relatorio.baseline_mae = metricas_ingenuas(dados, cfg, cfg_treino.metrics_original_units)
    logger.info(f'[{cfg.variant} F={cfg.F}] teste: MSE={relatorio.test_mse:.6f} MAE={relatorio.test_mae:.6f}')
    return params, relatorio, dados


def forecast_report(
    params: WDformerParameters,
    dados: DadosPreparados,
    cfg: ModelConfig,
    original_units: bool = False,
) -> ForecastReport:
    """Previsões e verdades das janelas de teste, com as métricas do horizonte."""
    X, Y = dados.teste
    previsoes = prever(params, cfg, X)
    if original_units:
        previsoes, Y = dados.scaler.inverter_janela(previsoes), dados.scaler.inverter_janela(Y)
    return ForecastReport(horizon=cfg.F, mse=mse(previsoes, Y), mae=mae(previsoes, Y), predictions=previsoes, truths=Y)


def evaluate(
    params: WDformerParameters,
    dados: DadosPreparados,
    cfg: ModelConfig,
    original_units: bool = False,
) -> tuple[float, float]:
    """MSE e MAE sobre todas as janelas de teste, no espaço escalado ou nas unidades originais."""
    relatorio = forecast_report(params, dados, cfg, original_units)
    return relatorio.mse, relatorio.mae


def _previsao_ingenua(X: np.ndarray, F: int) -> np.ndarray:
    return np.repeat(X[..., -1:], F, axis=-1)


def metricas_ingenuas(dados: DadosPreparados, cfg: ModelConfig, original_units: bool) -> tuple[float, float]:
    X, Y = dados.teste
    previsoes = _previsao_ingenua(X, cfg.F)
    if original_units:
        previsoes, Y = dados.scaler.inverter_janela(previsoes), dados.scaler.inverter_janela(Y)
    return mse(previsoes, Y), mae(previsoes, Y)


def naive_baseline(dataset: TimeSeriesDataset, K: int, F: int, original_units: bool = False) -> tuple[float, float]:
    """Repete o último valor observado: ``ŷ[:, t] = x[:, K]`` para todo t <= F, nas janelas de teste."""
    treino, _, teste = chronological_split(dataset, K=K, F=F)
    valores = teste.values
    if not original_units:
        valores = fit_scaler(treino).aplicar(valores)
    X, Y = stack_windows(make_windows(valores, K, F))
    previsoes = _previsao_ingenua(X, F)
    return mse(previsoes, Y), mae(previsoes, Y)


def threads_ablacao() -> int:
    """``WDF_THREADS`` ou o número de núcleos físicos, limitado a MAX_THREADS_ABLACAO."""
    definido = os.environ.get('WDF_THREADS')
    if definido:
        try:
            return max(1, int(definido))
        except ValueError as erro:
            raise ErroConfiguracao(f'WDF_THREADS={definido!r} não é inteiro') from erro
    return max(1, min(MAX_THREADS_ABLACAO, psutil.cpu_count(logical=False) or 1))


def run_ablation(
    dataset: TimeSeriesDataset,
    cfg: ModelConfig,
    cfg_treino: TrainConfig,
    variantes: tuple[str, ...] = VARIANTES,
    max_threads: int | None = None,
) -> list[RunReport]:
    """Treina e avalia cada variante em cada horizonte sob o mesmo protocolo e os mesmos dados."""
    horizontes = cfg_treino.horizons or [cfg.F]
    tarefas = [(variante, horizonte) for horizonte in horizontes for variante in variantes]
    threads = max_threads or threads_ablacao()
    paralelo = threads > 1 and len(tarefas) > 1

    def executar(tarefa: tuple[str, int]) -> RunReport:
        variante, horizonte = tarefa
        deslocamento = VARIANTES.index(variante)
        cfg_variante = replace(cfg, variant=variante, F=horizonte, seed=cfg.seed + deslocamento)
        treino_variante = replace(cfg_treino, seed=cfg_treino.seed + deslocamento, progress=cfg_treino.progress and not paralelo)
        _, relatorio, _ = train(cfg_variante, treino_variante, dataset)
        return relatorio

    logger.info(f'Ablação: {len(tarefas)} execuções em {threads} thread(s)')
    if paralelo:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(executar, tarefas))
    return [executar(tarefa) for tarefa in tarefas]


def tabela_ablacao(relatorios: list[RunReport]) -> pd.DataFrame:
    """Uma linha por (horizonte, variante) com MSE e MAE de teste, na ordem das variantes."""
    linhas = [
        {
            'horizon': relatorio.horizon,
            'variant': relatorio.variant,
            'mse': relatorio.test_mse,
            'mae': relatorio.test_mae,
        }
        for relatorio in relatorios
    ]
    tabela = pd.DataFrame(linhas, columns=['horizon', 'variant', 'mse', 'mae'])
    tabela['ordem'] = tabela['variant'].map(VARIANTES.index)
    return tabela.sort_values(['horizon', 'ordem'], kind='stable').drop(columns='ordem').reset_index(drop=True)


def prever_serie(
    params: WDformerParameters,
    cfg: ModelConfig,
    scaler: Scaler,
    valores: np.ndarray,
    horizonte: int | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Previsões em unidades originais para uma série nova.

    A última janela é sempre a previsão do futuro, a partir dos últimos K
    passos. Com ao menos K+horizonte passos, vem precedida das janelas
    deslizantes de retroteste, e ``verdades`` traz as verdades delas com NaN
    na última linha; senão ``verdades`` é None.
    """
    horizonte = horizonte or cfg.F
    if horizonte > cfg.F:
        raise ErroConfiguracao(f'horizonte={horizonte} excede o F={cfg.F} do modelo treinado')
    valores = np.asarray(valores, dtype=np.float64)
    if valores.ndim != 2 or valores.shape[1] != cfg.N:
        raise ErroConfiguracao(f'modelo espera N={cfg.N} variáveis, entrada tem N={valores.shape[-1]}')
    if len(valores) < cfg.K:
        raise ErroDados(f'série com {len(valores)} passos é mais curta que K={cfg.K}')

    escalados = scaler.aplicar(valores)
    futuro = escalados[-cfg.K :].T[None]
    verdades: np.ndarray | None = None
    if len(valores) >= cfg.K + horizonte:
        retroteste, _ = stack_windows(make_windows(escalados, cfg.K, horizonte))
        _, verdades_retroteste = stack_windows(make_windows(valores, cfg.K, horizonte))
        X = np.concatenate([retroteste, futuro])
        verdades = np.concatenate([verdades_retroteste, np.full((1, cfg.N, horizonte), np.nan)])
    else:
        X = futuro
    previsoes = scaler.inverter_janela(prever(params, cfg, X))[..., :horizonte]
    logger.info(f'{len(X) - 1} janela(s) de retroteste e uma previsão além do fim da série, horizonte {horizonte}')
    return previsoes, verdades
