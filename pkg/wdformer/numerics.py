"""Motor tensorial denso com diferenciação automática reversa (fita define-by-run).

Cada operação diferenciável executada dentro de ``with AutodiffTape():`` grava
um registro (entradas, saída, função de retropropagação). ``backward`` percorre
os registros uma única vez, em ordem reversa, acumulando gradientes.
"""

import logging
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .config import MODO_DEPURACAO
from .erros import ErroDimensao, ErroNumerico

logger = logging.getLogger(__name__)

_estado_local = threading.local()

Retropropagacao = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class TensorNode:
    """Arranjo denso em precisão dupla que participa do grafo de autodiff."""

    __array_priority__ = 1000

    def __init__(self, values: Any, requires_grad: bool = False) -> None:
        self.values: np.ndarray = np.asarray(values, dtype=np.float64)
        self.requires_grad: bool = requires_grad
        self.grad: np.ndarray | None = None
        self.fita: AutodiffTape | None = None
        if MODO_DEPURACAO and not np.all(np.isfinite(self.values)):
            raise ErroNumerico(f'valores não finitos num tensor de forma {self.shape}')

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def zerar_grad(self) -> None:
        self.grad = np.zeros_like(self.values)

    def __repr__(self) -> str:
        return f'TensorNode(shape={self.shape}, requires_grad={self.requires_grad})'

    def __add__(self, outro: Any) -> 'TensorNode':
        return add(self, outro)

    def __radd__(self, outro: Any) -> 'TensorNode':
        return add(outro, self)

    def __sub__(self, outro: Any) -> 'TensorNode':
        return sub(self, outro)

    def __rsub__(self, outro: Any) -> 'TensorNode':
        return sub(outro, self)

    def __mul__(self, outro: Any) -> 'TensorNode':
        return mul(self, outro)

    def __rmul__(self, outro: Any) -> 'TensorNode':
        return mul(outro, self)

    def __truediv__(self, escalar: float) -> 'TensorNode':
        return mul(self, 1.0 / float(escalar))

    def __neg__(self) -> 'TensorNode':
        return mul(self, -1.0)

    def __matmul__(self, outro: 'TensorNode') -> 'TensorNode':
        return matmul(self, outro)

    def __getitem__(self, indice: Any) -> 'TensorNode':
        return fatiar(self, indice)

    def reshape(self, *forma: int) -> 'TensorNode':
        return reshape(self, forma[0] if len(forma) == 1 and isinstance(forma[0], tuple) else forma)

    def transpose(self, *eixos: int) -> 'TensorNode':
        return transpose(self, eixos)

    def sum(self, axis: int | None = None, keepdims: bool = False) -> 'TensorNode':
        return soma(self, axis, keepdims)

    def mean(self, axis: int | None = None, keepdims: bool = False) -> 'TensorNode':
        return media(self, axis, keepdims)


@dataclass
class RegistroOperacao:
    entradas: tuple[TensorNode, ...]
    saida: TensorNode
    retropropagar: Retropropagacao


class AutodiffTape:
    """Sequência só de acréscimo de registros de operação; ativa por thread."""

    def __init__(self) -> None:
        self.nodes: list[RegistroOperacao] = []
        self._anterior: AutodiffTape | None = None

    def __enter__(self) -> 'AutodiffTape':
        self._anterior = fita_ativa()
        _estado_local.fita = self
        return self

    def __exit__(self, *_: Any) -> None:
        _estado_local.fita = self._anterior

    def registrar(self, registro: RegistroOperacao) -> None:
        self.nodes.append(registro)

    def retropropagar(self, perda: TensorNode) -> None:
        gradientes: dict[int, np.ndarray] = {id(perda): np.ones_like(perda.values)}
        folhas: dict[int, TensorNode] = {}

        for registro in reversed(self.nodes):
            gradiente = gradientes.pop(id(registro.saida), None)
            if gradiente is None:
                continue
            registro.saida.grad = gradiente
            parciais = registro.retropropagar(gradiente)
            for entrada, parcial in zip(registro.entradas, parciais, strict=True):
                if parcial is None or not entrada.requires_grad:
                    continue
                chave = id(entrada)
                if chave in gradientes:
                    gradientes[chave] = gradientes[chave] + parcial
                else:
                    gradientes[chave] = parcial
                if entrada.fita is not self:
                    folhas[chave] = entrada

        for chave, folha in folhas.items():
            gradiente = gradientes.get(chave)
            if gradiente is None:
                continue
            folha.grad = gradiente if folha.grad is None else folha.grad + gradiente


def fita_ativa() -> AutodiffTape | None:
    return getattr(_estado_local, 'fita', None)


def como_no(valor: Any) -> TensorNode:
    return valor if isinstance(valor, TensorNode) else TensorNode(valor)


def _resultado(valores: np.ndarray, entradas: Sequence[TensorNode], retro: Retropropagacao) -> TensorNode:
    precisa_grad = any(entrada.requires_grad for entrada in entradas)
    saida = TensorNode(valores, requires_grad=precisa_grad)
    fita = fita_ativa()
    if precisa_grad and fita is not None:
        fita.registrar(RegistroOperacao(tuple(entradas), saida, retro))
        saida.fita = fita
    return saida


def _reduzir_para_forma(gradiente: np.ndarray, forma: tuple[int, ...]) -> np.ndarray:
    """Soma os eixos expandidos por broadcasting até voltar à forma do operando."""
    while gradiente.ndim > len(forma):
        gradiente = gradiente.sum(axis=0)
    for eixo, tamanho in enumerate(forma):
        if tamanho == 1 and gradiente.shape[eixo] != 1:
            gradiente = gradiente.sum(axis=eixo, keepdims=True)
    return gradiente


def backward(loss: TensorNode) -> None:
    """Popula ``grad`` de todo nó com requires_grad alcançável a partir da perda escalar."""
    if loss.values.size != 1:
        raise ErroDimensao(f'backward exige perda escalar, recebeu forma {loss.shape}')
    if loss.fita is None:
        if loss.requires_grad:
            loss.grad = np.ones_like(loss.values)
            return
        raise ErroDimensao('perda não está registrada em nenhuma fita')
    loss.fita.retropropagar(loss)


# ---------------------------------------------------------------------------
# Operações elementares
# ---------------------------------------------------------------------------


def add(a: Any, b: Any) -> TensorNode:
    a, b = como_no(a), como_no(b)

    def retro(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _reduzir_para_forma(g, a.shape), _reduzir_para_forma(g, b.shape)

    return _resultado(a.values + b.values, (a, b), retro)


def sub(a: Any, b: Any) -> TensorNode:
    a, b = como_no(a), como_no(b)

    def retro(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _reduzir_para_forma(g, a.shape), _reduzir_para_forma(-g, b.shape)

    return _resultado(a.values - b.values, (a, b), retro)


def mul(a: Any, b: Any) -> TensorNode:
    a, b = como_no(a), como_no(b)

    def retro(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _reduzir_para_forma(g * b.values, a.shape), _reduzir_para_forma(g * a.values, b.shape)

    return _resultado(a.values * b.values, (a, b), retro)


def exp(a: TensorNode) -> TensorNode:
    saida = np.exp(a.values)

    def retro(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * saida,)

    return _resultado(saida, (a,), retro)


def soma(a: TensorNode, eixo: int | None = None, keepdims: bool = False) -> TensorNode:
    def retro(g: np.ndarray) -> tuple[np.ndarray]:
        if eixo is not None and not keepdims:
            g = np.expand_dims(g, eixo)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _resultado(a.values.sum(axis=eixo, keepdims=keepdims), (a,), retro)


def media(a: TensorNode, eixo: int | None = None, keepdims: bool = False) -> TensorNode:
    quantidade = a.values.size if eixo is None else a.shape[eixo]
    return mul(soma(a, eixo, keepdims), 1.0 / quantidade)


def reshape(a: TensorNode, forma: Sequence[int]) -> TensorNode:
    def retro(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(a.shape),)

    return _resultado(a.values.reshape(tuple(forma)), (a,), retro)


def transpose(a: TensorNode, eixos: Sequence[int] = ()) -> TensorNode:
    eixos = tuple(eixos) or tuple(reversed(range(a.ndim)))
    inversos = tuple(np.argsort(eixos))

    def retro(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.transpose(inversos),)

    return _resultado(a.values.transpose(eixos), (a,), retro)


def trocar_ultimos(a: TensorNode) -> TensorNode:
    eixos = list(range(a.ndim))
    eixos[-1], eixos[-2] = eixos[-2], eixos[-1]
    return transpose(a, eixos)


def _indexacao_basica(indice: Any) -> bool:
    itens = indice if isinstance(indice, tuple) else (indice,)
    return all(isinstance(item, (int, np.integer, slice)) or item is Ellipsis or item is None for item in itens)


def fatiar(a: TensorNode, indice: Any) -> TensorNode:
    basica = _indexacao_basica(indice)

    def retro(g: np.ndarray) -> tuple[np.ndarray]:
        completo = np.zeros_like(a.values)
        if basica:
            completo[indice] += g
        else:
            np.add.at(completo, indice, g)
        return (completo,)

    return _resultado(a.values[indice], (a,), retro)


def concat(nos: Sequence[TensorNode], eixo: int = -1) -> TensorNode:
    nos = [como_no(no) for no in nos]
    cortes = np.cumsum([no.shape[eixo] for no in nos])[:-1]

    def retro(g: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(g, cortes, axis=eixo))

    return _resultado(np.concatenate([no.values for no in nos], axis=eixo), nos, retro)


# ---------------------------------------------------------------------------
# Álgebra linear e camadas
# ---------------------------------------------------------------------------


def matmul(a: TensorNode, b: TensorNode) -> TensorNode:
    """Produto matricial (com dimensões de lote à frente, semântica do ``@`` do numpy)."""
    a, b = como_no(a), como_no(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ErroDimensao(f'matmul: formas incompatíveis {list(a.shape)} e {list(b.shape)}')

    def retro(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = g @ np.swapaxes(b.values, -1, -2)
        grad_b = np.swapaxes(a.values, -1, -2) @ g
        return _reduzir_para_forma(grad_a, a.shape), _reduzir_para_forma(grad_b, b.shape)

    return _resultado(a.values @ b.values, (a, b), retro)


def linear(x: TensorNode, w: TensorNode, b: TensorNode) -> TensorNode:
    """Mapa afim ao longo do último eixo: ``x @ w + b``."""
    x, w, b = como_no(x), como_no(w), como_no(b)
    if w.ndim != 2 or x.shape[-1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ErroDimensao(f'linear: formas incompatíveis x={list(x.shape)} w={list(w.shape)} b={list(b.shape)}')
    if x.ndim == 1:
        return reshape(add(matmul(reshape(x, (1, x.shape[0])), w), b), (w.shape[1],))
    return add(matmul(x, w), b)


def softmax_rows(a: TensorNode) -> TensorNode:
    """Softmax ao longo do último eixo, com subtração do máximo por estabilidade."""
    deslocado = a.values - a.values.max(axis=-1, keepdims=True)
    exponenciais = np.exp(deslocado)
    saida = exponenciais / exponenciais.sum(axis=-1, keepdims=True)

    def retro(g: np.ndarray) -> tuple[np.ndarray]:
        return (saida * (g - (g * saida).sum(axis=-1, keepdims=True)),)

    return _resultado(saida, (a,), retro)


def rms_norm(x: TensorNode, gain: TensorNode, eps: float) -> TensorNode:
    """``x / sqrt(mean(x²) + eps) ⊙ gain`` ao longo do último eixo."""
    x, gain = como_no(x), como_no(gain)
    raiz = np.sqrt((x.values**2).mean(axis=-1, keepdims=True) + eps)
    normalizado = x.values / raiz

    def retro(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g_norm = g * gain.values
        grad_x = (g_norm - normalizado * (g_norm * normalizado).mean(axis=-1, keepdims=True)) / raiz
        return grad_x, _reduzir_para_forma(g * normalizado, gain.shape)

    return _resultado(normalizado * gain.values, (x, gain), retro)


def layer_norm(x: TensorNode, gain: TensorNode, bias: TensorNode, eps: float) -> TensorNode:
    media_x = x.values.mean(axis=-1, keepdims=True)
    desvio = np.sqrt(x.values.var(axis=-1, keepdims=True) + eps)
    normalizado = (x.values - media_x) / desvio

    def retro(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_norm = g * gain.values
        grad_x = (
            g_norm
            - g_norm.mean(axis=-1, keepdims=True)
            - normalizado * (g_norm * normalizado).mean(axis=-1, keepdims=True)
        ) / desvio
        return (
            grad_x,
            _reduzir_para_forma(g * normalizado, gain.shape),
            _reduzir_para_forma(g, bias.shape),
        )

    return _resultado(normalizado * gain.values + bias.values, (x, gain, bias), retro)


_RAIZ_2_PI = np.sqrt(2.0 / np.pi)


def gelu(x: TensorNode) -> TensorNode:
    """GELU pela aproximação com tanh."""
    interno = _RAIZ_2_PI * (x.values + 0.044715 * x.values**3)
    tangente = np.tanh(interno)

    def retro(g: np.ndarray) -> tuple[np.ndarray]:
        derivada_interno = _RAIZ_2_PI * (1.0 + 3 * 0.044715 * x.values**2)
        derivada = 0.5 * (1.0 + tangente) + 0.5 * x.values * (1.0 - tangente**2) * derivada_interno
        return (g * derivada,)

    return _resultado(0.5 * x.values * (1.0 + tangente), (x,), retro)


def dropout(x: TensorNode, taxa: float, rng: np.random.Generator | None, treinando: bool) -> TensorNode:
    """Dropout invertido; identidade fora do treino."""
    if not treinando or taxa <= 0.0 or rng is None:
        return x
    mascara = (rng.random(x.shape) >= taxa) / (1.0 - taxa)
    return mul(x, mascara)


def mse_loss(pred: TensorNode, truth: Any) -> TensorNode:
    diferenca = sub(pred, truth)
    return media(mul(diferenca, diferenca))


# ---------------------------------------------------------------------------
# Verificação de gradientes
# ---------------------------------------------------------------------------


def grad_check(f: Callable[[TensorNode], TensorNode], x: Any, h: float = 1e-5) -> float:
    """Maior erro relativo entre o gradiente analítico e diferenças centrais.

    O erro por coordenada é ``|a - n| / max(1, |a|, |n|)``.
    """
    ponto = np.array(x, dtype=np.float64)
    folha = TensorNode(ponto.copy(), requires_grad=True)
    with AutodiffTape():
        backward(f(folha))
    analitico = folha.grad if folha.grad is not None else np.zeros_like(ponto)

    numerico = np.empty_like(ponto)
    for indice in range(ponto.size):
        acima, abaixo = ponto.copy(), ponto.copy()
        acima.flat[indice] += h
        abaixo.flat[indice] -= h
        valor_acima = float(f(TensorNode(acima)).values.sum())
        valor_abaixo = float(f(TensorNode(abaixo)).values.sum())
        numerico.flat[indice] = (valor_acima - valor_abaixo) / (2.0 * h)

    escala = np.maximum(1.0, np.maximum(np.abs(analitico), np.abs(numerico)))
    erro = float(np.max(np.abs(analitico - numerico) / escala)) if ponto.size else 0.0
    logger.debug(f'grad_check: {ponto.size} coordenadas, erro relativo máximo {erro:.3e}')
    return erro
