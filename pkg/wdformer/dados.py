"""Leitura de séries, divisão cronológica, janelas, escala e métricas."""

import gzip
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd  # type: ignore[import]

from .config import RAZOES_DIVISAO
from .detector_csv import ENCODING_RESERVA, DetectorCSV
from .erros import ErroCodificacao, ErroConfiguracao, ErroDados, ErroDimensao
from .tipos import DataConfig, Scaler, TimeSeriesDataset, WindowSample
from .utils import garantir_caminho_absoluto

logger = logging.getLogger(__name__)

MARCADORES_AUSENTES: frozenset[str] = frozenset({'', 'nan', 'na', 'null', 'none'})


def load_csv(caminho: str, opcoes: DataConfig | None = None) -> TimeSeriesDataset:
    """Lê um CSV de série temporal com detecção automática de delimitador, cabeçalho e carimbo de tempo."""
    opcoes = opcoes or DataConfig(path=caminho)
    caminho_absoluto: str = garantir_caminho_absoluto(caminho)

    if not Path(caminho_absoluto).is_file():
        logger.error(f'Arquivo não encontrado: {caminho_absoluto}')
        raise ErroDados(f'arquivo não encontrado: {caminho_absoluto}')

    detectado = DetectorCSV().detectar_configuracao(caminho_absoluto)
    delimitador = opcoes.delimiter or detectado['delimiter']
    cabecalho = detectado['header'] if opcoes.header is None else opcoes.header
    coluna_tempo = detectado['timestamp'] if opcoes.timestamp is None else opcoes.timestamp

    parametros_leitura = {
        'sep': delimitador,
        'header': 0 if cabecalho else None,
        'encoding': detectado['encoding'],
        'compression': detectado['compression'],
        'dtype': str,
        'keep_default_na': False,
        'skip_blank_lines': True,
    }
    try:
        quadro = _ler_quadro(caminho_absoluto, parametros_leitura)
    except ErroCodificacao as erro:
        # A detecção só vê o começo do arquivo; UTF-8 quebrado depois dele é relido como Latin-1
        if erro.encoding.lower() != 'utf-8':
            raise
        logger.warning(f'{erro}; relendo como {ENCODING_RESERVA}')
        parametros_leitura['encoding'] = ENCODING_RESERVA
        quadro = _ler_quadro(caminho_absoluto, parametros_leitura)
    if quadro.shape[1] == 1 and opcoes.delimiter is None:
        # Detecção ambígua: tenta os outros delimitadores antes de aceitar uma coluna só
        for alternativo in DetectorCSV.DELIMITADORES:
            if alternativo == delimitador:
                continue
            try:
                tentativa = _ler_quadro(caminho_absoluto, parametros_leitura | {'sep': alternativo})
            except ErroDados:
                continue
            if tentativa.shape[1] > 1:
                logger.warning(f'Delimitador {delimitador!r} gerou uma coluna só; usando {alternativo!r}')
                quadro = tentativa
                break

    deslocamento_linha = 2 if cabecalho else 1
    if quadro.empty:
        raise ErroDados(f'arquivo sem linhas de dados: {caminho_absoluto}')

    # Campos faltando no fim da linha chegam como NaN de verdade (células vazias chegam como '')
    irregulares = np.flatnonzero(quadro.isna().any(axis=1).to_numpy())
    if len(irregulares):
        linha = int(irregulares[0]) + deslocamento_linha
        raise ErroDados(f'linha {linha} de {caminho_absoluto} tem menos campos que o cabeçalho ({quadro.shape[1]})')

    timestamps: list[str] | None = None
    if coluna_tempo:
        timestamps = quadro.iloc[:, 0].str.strip().tolist()
        quadro = quadro.iloc[:, 1:]
    if quadro.shape[1] == 0:
        raise ErroDados(f'nenhuma coluna numérica em {caminho_absoluto}')

    nomes = [str(nome) for nome in quadro.columns] if cabecalho else [f'var{j}' for j in range(quadro.shape[1])]
    texto = quadro.apply(lambda coluna: coluna.str.strip())
    ausente = texto.apply(lambda coluna: coluna.str.lower().isin(MARCADORES_AUSENTES))
    valores = texto.apply(lambda coluna: pd.to_numeric(coluna, errors='coerce'))

    invalidos = valores.isna() & ~ausente
    if invalidos.to_numpy().any():
        posicao_linha, posicao_coluna = np.argwhere(invalidos.to_numpy())[0]
        celula = texto.iat[posicao_linha, posicao_coluna]
        raise ErroDados(
            f'célula não numérica {celula!r} na linha {posicao_linha + deslocamento_linha}, coluna {nomes[posicao_coluna]!r} de {caminho_absoluto}'
        )

    linhas_nan = valores.isna().any(axis=1).to_numpy()
    if linhas_nan.any():
        numeros = [int(i) + deslocamento_linha for i in np.flatnonzero(linhas_nan)]
        if opcoes.nan_policy == 'fail':
            raise ErroDados(f'{len(numeros)} linha(s) com valores ausentes em {caminho_absoluto}, primeira na linha {numeros[0]}')
        logger.warning(f'Descartando {len(numeros)} linha(s) com valores ausentes (linhas {numeros[:10]})')
        valores = valores.loc[~linhas_nan]
        if timestamps is not None:
            timestamps = [carimbo for carimbo, nan in zip(timestamps, linhas_nan, strict=True) if not nan]

    matriz = valores.to_numpy(dtype=np.float64)
    if matriz.shape[0] == 0:
        raise ErroDados(f'nenhuma linha válida em {caminho_absoluto}')

    logger.info(f'Série {Path(caminho_absoluto).name} lida: T={matriz.shape[0]}, N={matriz.shape[1]}')
    return TimeSeriesDataset(name=Path(caminho_absoluto).stem, values=matriz, variate_names=nomes, timestamps=timestamps)


def _ler_quadro(caminho: str, parametros_leitura: dict[str, Any]) -> pd.DataFrame:
    try:
        return pd.read_csv(caminho, **parametros_leitura)
    except UnicodeDecodeError as erro:
        encoding = parametros_leitura['encoding']
        raise ErroCodificacao(caminho, encoding, _posicao_invalida(caminho, encoding)) from erro
    except pd.errors.ParserError as erro:
        raise ErroDados(f'linhas irregulares em {caminho}: {erro}') from erro
    except pd.errors.EmptyDataError as erro:
        raise ErroDados(f'arquivo vazio: {caminho}') from erro
    except ValueError as erro:
        raise ErroDados(f'falha ao ler {caminho}: {erro}') from erro


def _posicao_invalida(caminho: str, encoding: str) -> int | None:
    """Deslocamento, em bytes (descompactados), do primeiro byte que ``encoding`` rejeita."""
    abrir = gzip.open if Path(caminho).suffix == '.gz' else open
    with abrir(caminho, 'rb') as arquivo:
        conteudo = arquivo.read()
    try:
        conteudo.decode(encoding)
    except UnicodeDecodeError as erro:
        return erro.start
    return None


def synthetic_benchmark(
    T: int = 4000,
    N: int = 3,
    periodos: tuple[int, int] = (24, 96),
    ruido: float = 0.1,
    seed: int = 2024,
) -> TimeSeriesDataset:
    """Soma de duas senoides (períodos 24 e 96) com fases por variável mais ruído gaussiano."""
    rng = np.random.default_rng(seed)
    tempo = np.arange(T, dtype=np.float64)[:, None]
    fases = rng.uniform(0.0, 2.0 * np.pi, size=(2, N))
    amplitudes = rng.uniform(0.5, 1.5, size=(2, N))
    valores = (
        amplitudes[0] * np.sin(2.0 * np.pi * tempo / periodos[0] + fases[0])
        + amplitudes[1] * np.sin(2.0 * np.pi * tempo / periodos[1] + fases[1])
        + ruido * rng.standard_normal((T, N))
    )
    return TimeSeriesDataset(name='sintetico', values=valores, variate_names=[f'var{j}' for j in range(N)])


def chronological_split(
    ds: TimeSeriesDataset,
    razoes: tuple[float, float, float] = RAZOES_DIVISAO,
    K: int | None = None,
    F: int | None = None,
) -> tuple[TimeSeriesDataset, TimeSeriesDataset, TimeSeriesDataset]:
    """Segmentos contíguos treino/validação/teste; piso nas fronteiras, resto para o teste."""
    total = float(sum(razoes))
    if len(razoes) != 3 or total <= 0 or any(razao < 0 for razao in razoes):
        raise ErroConfiguracao(f'razões de divisão inválidas: {razoes}')
    n_treino = math.floor(ds.T * razoes[0] / total + 1e-9)
    n_validacao = math.floor(ds.T * razoes[1] / total + 1e-9)
    fronteiras = (0, n_treino, n_treino + n_validacao, ds.T)

    segmentos = tuple(
        ds.recortar(inicio, fim, nome)
        for inicio, fim, nome in zip(fronteiras[:-1], fronteiras[1:], ('train', 'val', 'test'), strict=True)
    )
    if K is not None and F is not None:
        curtos = [f'{segmento.name} com {segmento.T} < K+F={K + F}' for segmento in segmentos if segmento.T < K + F]
        if curtos:
            raise ErroConfiguracao(f'segmento curto demais para uma janela: {", ".join(curtos)}')
    return segmentos  # type: ignore[return-value]


def make_windows(segment: TimeSeriesDataset | np.ndarray, K: int, F: int, stride: int = 1) -> list[WindowSample]:
    """Janelas deslizantes que nunca cruzam a fronteira do segmento."""
    valores = segment.values if isinstance(segment, TimeSeriesDataset) else np.asarray(segment, dtype=np.float64)
    if stride < 1:
        raise ErroConfiguracao(f'stride={stride} deve ser >= 1')
    comprimento = valores.shape[0]
    if comprimento < K + F:
        logger.warning(f'Segmento com {comprimento} passos não comporta janela K+F={K + F}')
        return []
    return [
        WindowSample(x=valores[inicio : inicio + K].T.copy(), y=valores[inicio + K : inicio + K + F].T.copy(), inicio=inicio)
        for inicio in range(0, comprimento - K - F + 1, stride)
    ]


def stack_windows(janelas: list[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    """Empilha janelas em ``X[B×N×K]`` e ``Y[B×N×F]``."""
    if not janelas:
        raise ErroConfiguracao('nenhuma janela para empilhar')
    return np.stack([janela.x for janela in janelas]), np.stack([janela.y for janela in janelas])


def fit_scaler(train: TimeSeriesDataset | np.ndarray, nomes: list[str] | None = None) -> Scaler:
    """Média e desvio populacional (1/n) por variável, só com o segmento de treino."""
    valores = train.values if isinstance(train, TimeSeriesDataset) else np.asarray(train, dtype=np.float64)
    nomes = nomes or (train.variate_names if isinstance(train, TimeSeriesDataset) else None)
    if valores.shape[0] == 0:
        raise ErroDados('segmento de treino vazio')
    media = valores.mean(axis=0)
    desvio = valores.std(axis=0)
    constantes = np.flatnonzero(desvio == 0)
    if len(constantes):
        rotulos = [nomes[j] if nomes else f'var{j}' for j in constantes]
        raise ErroDados(f'variável(is) de variância zero no treino: {", ".join(rotulos)}')
    return Scaler(mean=media, std=desvio)


def _verificar_formas(pred: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred, truth = np.asarray(pred, dtype=np.float64), np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ErroDimensao(f'previsão {list(pred.shape)} e verdade {list(truth.shape)} com formas diferentes')
    return pred, truth


def mse(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = _verificar_formas(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = _verificar_formas(pred, truth)
    return float(np.mean(np.abs(pred - truth)))


@dataclass(frozen=True)
class Preenchimento:
    """Comprimento original do eixo de tempo antes do preenchimento."""

    original_length: int
    padded_length: int


def pad_to_divisible(x: np.ndarray, L: int) -> tuple[np.ndarray, Preenchimento]:
    """Completa o eixo de tempo (último) à direita, replicando a borda, até múltiplo de 2^L."""
    x = np.asarray(x, dtype=np.float64)
    passo = 2**L
    original = x.shape[-1]
    alvo = -(-original // passo) * passo
    if alvo == original:
        return x, Preenchimento(original, original)
    largura = [(0, 0)] * (x.ndim - 1) + [(0, alvo - original)]
    return np.pad(x, largura, mode='edge'), Preenchimento(original, alvo)


def truncar(y: np.ndarray, info: Preenchimento) -> np.ndarray:
    return y[..., : info.original_length]
