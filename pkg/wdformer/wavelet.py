"""Transformada wavelet discreta multinível com extensão periódica.

Convenção: análise por correlação com subamostragem nos índices pares,
``aprox[i] = sum_k g[k] x[(2i+k) mod T]``. Os conjuntos de coeficientes são
ordenados ``[aprox_L, detalhe_L, detalhe_{L-1}, ..., detalhe_1]``.
"""

import logging
from functools import lru_cache

import numpy as np
import pywt  # type: ignore[import]

from .config import FAMILIAS_WAVELET
from .erros import ErroComprimento
from .numerics import TensorNode
from .tipos import WaveletCoefficients, WaveletFilter

logger = logging.getLogger(__name__)


def get_filter(name: str, perturbacao: float = 0.0) -> WaveletFilter:
    """Monta o par ortonormal a partir do passa-baixa de reconstrução do PyWavelets.

    ``perturbacao`` soma um desvio ao primeiro coeficiente do passa-baixa; só é
    usado como controle negativo do autoteste.
    """
    if name not in FAMILIAS_WAVELET:
        raise ValueError(f'Família wavelet {name!r} não suportada; use uma de {FAMILIAS_WAVELET}')
    passa_baixa = np.array(pywt.Wavelet(name).rec_lo, dtype=np.float64)
    if perturbacao:
        passa_baixa[0] += perturbacao
    comprimento = len(passa_baixa)
    passa_alta = np.array([(-1) ** k * passa_baixa[comprimento - 1 - k] for k in range(comprimento)])
    passa_baixa.setflags(write=False)
    passa_alta.setflags(write=False)
    return WaveletFilter(name=name, lowpass=passa_baixa, highpass=passa_alta)


def comprimentos_niveis(T: int, L: int) -> list[int]:
    """Comprimentos ``[T/2^L, T/2^L, T/2^(L-1), ..., T/2]``."""
    return [T // 2**L] + [T // 2**nivel for nivel in range(L, 0, -1)]


def _verificar_divisivel(T: int, L: int) -> None:
    if L < 1:
        raise ErroComprimento(f'número de níveis L={L} deve ser >= 1')
    if T % 2**L != 0:
        raise ErroComprimento(f'comprimento {T} não é divisível por 2^L={2**L}')


@lru_cache(maxsize=64)
def _matriz_nivel(T: int, lowpass: tuple[float, ...], highpass: tuple[float, ...]) -> np.ndarray:
    """Matriz ortogonal T×T de um nível: T/2 linhas passa-baixa seguidas de T/2 passa-alta."""
    metade = T // 2
    matriz = np.zeros((T, T))
    linhas = np.arange(metade)[:, None]
    colunas = (2 * np.arange(metade)[:, None] + np.arange(len(lowpass))[None, :]) % T
    np.add.at(matriz, (np.broadcast_to(linhas, colunas.shape), colunas), np.broadcast_to(lowpass, colunas.shape))
    np.add.at(matriz, (np.broadcast_to(linhas + metade, colunas.shape), colunas), np.broadcast_to(highpass, colunas.shape))
    matriz.setflags(write=False)
    return matriz


def _matriz_do_filtro(T: int, f: WaveletFilter) -> np.ndarray:
    if T % 2 != 0:
        raise ErroComprimento(f'comprimento {T} deve ser par')
    if T < len(f.lowpass):
        raise ErroComprimento(f'comprimento {T} menor que o filtro {f.name} ({len(f.lowpass)} coeficientes)')
    return _matriz_nivel(T, tuple(f.lowpass), tuple(f.highpass))


def dwt_single_level(x: np.ndarray, f: WaveletFilter) -> tuple[np.ndarray, np.ndarray]:
    """Um passo de análise ao longo do último eixo."""
    x = np.asarray(x, dtype=np.float64)
    T = x.shape[-1]
    coeficientes = x @ _matriz_do_filtro(T, f).T
    return coeficientes[..., : T // 2], coeficientes[..., T // 2 :]


def idwt_single_level(approx: np.ndarray, detail: np.ndarray, f: WaveletFilter) -> np.ndarray:
    """Um passo de síntese: adjunto (e inverso) exato de ``dwt_single_level``."""
    approx = np.asarray(approx, dtype=np.float64)
    detail = np.asarray(detail, dtype=np.float64)
    if approx.shape != detail.shape:
        raise ErroComprimento(f'aproximação {approx.shape} e detalhe {detail.shape} com formas diferentes')
    T = 2 * approx.shape[-1]
    return np.concatenate([approx, detail], axis=-1) @ _matriz_do_filtro(T, f)


def dwt_multilevel(x: np.ndarray, L: int, f: WaveletFilter) -> WaveletCoefficients:
    """Pirâmide de L níveis, redecompondo a aproximação a cada nível."""
    x = np.asarray(x, dtype=np.float64)
    T = x.shape[-1]
    _verificar_divisivel(T, L)
    aproximacao = x
    detalhes: list[np.ndarray] = []
    for _ in range(L):
        aproximacao, detalhe = dwt_single_level(aproximacao, f)
        detalhes.append(detalhe)
    return WaveletCoefficients(levels=L, sets=[aproximacao, *reversed(detalhes)], original_length=T)


def _verificar_estrutura(c: WaveletCoefficients) -> None:
    if len(c.sets) != c.levels + 1:
        raise ErroComprimento(f'esperados {c.levels + 1} conjuntos de coeficientes, recebidos {len(c.sets)}')
    _verificar_divisivel(c.original_length, c.levels)
    esperados = comprimentos_niveis(c.original_length, c.levels)
    if c.comprimentos != esperados:
        raise ErroComprimento(f'comprimentos {c.comprimentos} diferentes dos esperados {esperados}')


def idwt_multilevel(c: WaveletCoefficients, f: WaveletFilter) -> np.ndarray:
    """Reconstrução de baixo para cima a partir do nível L."""
    _verificar_estrutura(c)
    sinal = c.sets[0]
    for detalhe in c.sets[1:]:
        sinal = idwt_single_level(sinal, detalhe, f)
    return sinal


def split_wave(flat: np.ndarray | TensorNode, F: int, L: int) -> WaveletCoefficients:
    """Particiona o vetor achatado em segmentos consecutivos de comprimentos por nível.

    Aceita também um ``TensorNode``; os segmentos saem então como fatias na fita,
    que é como a saída da projeção de previsão chega à IDWT.
    """
    if not isinstance(flat, TensorNode):
        flat = np.asarray(flat, dtype=np.float64)
    _verificar_divisivel(F, L)
    if flat.shape[-1] != F:
        raise ErroComprimento(f'vetor com {flat.shape[-1]} elementos, esperado F={F}')
    limites = [0, *np.cumsum(comprimentos_niveis(F, L)).tolist()]
    conjuntos = [flat[..., inicio:fim] for inicio, fim in zip(limites[:-1], limites[1:], strict=True)]
    return WaveletCoefficients(levels=L, sets=conjuntos, original_length=F)  # type: ignore[arg-type]


def concat_coefficients(c: WaveletCoefficients) -> np.ndarray:
    return np.concatenate(c.sets, axis=-1)


@lru_cache(maxsize=64)
def _matriz_analise(T: int, L: int, lowpass: tuple[float, ...], highpass: tuple[float, ...]) -> np.ndarray:
    atual = np.eye(T)
    detalhes: list[np.ndarray] = []
    for _ in range(L):
        comprimento = atual.shape[0]
        nivel = _matriz_nivel(comprimento, lowpass, highpass) @ atual
        atual, detalhe = nivel[: comprimento // 2], nivel[comprimento // 2 :]
        detalhes.append(detalhe)
    matriz = np.vstack([atual, *reversed(detalhes)])
    matriz.setflags(write=False)
    return matriz


def analysis_matrix(T: int, L: int, f: WaveletFilter) -> np.ndarray:
    """Matriz ortogonal M com ``concat(dwt_multilevel(x)) = M @ x``; ``M.T`` faz a IDWT."""
    _verificar_divisivel(T, L)
    if T // 2 ** (L - 1) < len(f.lowpass):
        raise ErroComprimento(f'comprimento {T} curto demais para {L} níveis de {f.name}')
    return _matriz_analise(T, L, tuple(f.lowpass), tuple(f.highpass))
