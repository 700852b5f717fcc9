"""Rede WDformer: embedding wavelet, encoder de atenção diferencial e reconstrução por IDWT.

Cada variável é um token (dimensões invertidas): a atenção relaciona variáveis,
não instantes de tempo, e seu custo independe do comprimento da janela.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, fields, is_dataclass, replace
from typing import Any

import numpy as np

from .config import DESVIO_LAMBDA, EPS_LAYER_NORM, EPS_NORMALIZACAO_INSTANCIA, EPS_RMS_NORM, VARIANTES
from .dados import pad_to_divisible
from .erros import ErroConfiguracao
from .numerics import (
    TensorNode,
    concat,
    dropout,
    exp,
    gelu,
    layer_norm,
    linear,
    matmul,
    rms_norm,
    softmax_rows,
    soma,
    trocar_ultimos,
)
from .tipos import ModelConfig
from .wavelet import analysis_matrix, comprimentos_niveis, dwt_multilevel, get_filter, split_wave

logger = logging.getLogger(__name__)


@dataclass
class ParametrosLinear:
    weight: TensorNode
    bias: TensorNode


@dataclass
class ParametrosNorma:
    gain: TensorNode
    bias: TensorNode


@dataclass
class WaveletEmbeddingParams:
    """Um mapa linear por conjunto de coeficientes (L+1 mapas)."""

    maps: list[ParametrosLinear]


@dataclass
class DiffAttentionParams:
    Wq: TensorNode
    Wk: TensorNode
    Wv: TensorNode
    Wo: ParametrosLinear
    lambda_q1: TensorNode
    lambda_k1: TensorNode
    lambda_q2: TensorNode
    lambda_k2: TensorNode
    rms_gain: TensorNode
    lambda_init: float

    @property
    def h(self) -> int:
        return int(self.lambda_q1.shape[0])

    @property
    def d_h(self) -> int:
        return int(self.lambda_q1.shape[1])


@dataclass
class EncoderLayer:
    layer_index: int
    attention: DiffAttentionParams
    ffn_in: ParametrosLinear
    ffn_out: ParametrosLinear
    norm1: ParametrosNorma
    norm2: ParametrosNorma


@dataclass
class WDformerParameters:
    embedding: WaveletEmbeddingParams | ParametrosLinear
    layers: list[EncoderLayer]
    head: ParametrosLinear


@dataclass
class ContadorAtencao:
    """Conta as multiplicações escalares gastas nos produtos de score Q·Kᵀ."""

    multiplicacoes_score: int = 0

    def registrar(self, q: TensorNode, k: TensorNode) -> None:
        self.multiplicacoes_score += int(np.prod(q.shape)) * int(k.shape[-2])


# ---------------------------------------------------------------------------
# Inicialização e nomes de parâmetros
# ---------------------------------------------------------------------------


def lambda_init_schedule(l: int) -> float:
    """``0.7 - 0.5·exp(-0.3·(l-1))`` para a camada l (começando em 1)."""
    if l < 1:
        raise ValueError(f'índice de camada l={l} deve ser >= 1')
    return 0.7 - 0.5 * math.exp(-0.3 * (l - 1))


def larguras_embedding(d: int, L: int) -> list[int]:
    """Larguras de saída dos L+1 mapas; os L primeiros recebem ⌊d/(L+1)⌋."""
    base = d // (L + 1)
    return [base] * L + [d - L * base]


def _parametro(valores: np.ndarray) -> TensorNode:
    return TensorNode(valores, requires_grad=True)


def _linear_uniforme(rng: np.random.Generator, entrada: int, saida: int) -> ParametrosLinear:
    limite = 1.0 / math.sqrt(entrada)
    return ParametrosLinear(
        weight=_parametro(rng.uniform(-limite, limite, size=(entrada, saida))),
        bias=_parametro(rng.uniform(-limite, limite, size=saida)),
    )


def _norma(d: int) -> ParametrosNorma:
    return ParametrosNorma(gain=_parametro(np.ones(d)), bias=_parametro(np.zeros(d)))


def _atencao_inicial(rng: np.random.Generator, cfg: ModelConfig, l: int) -> DiffAttentionParams:
    limite = 1.0 / math.sqrt(cfg.d)
    projecoes = [_parametro(rng.uniform(-limite, limite, size=(cfg.d, 2 * cfg.d))) for _ in range(3)]
    saida = _linear_uniforme(rng, 2 * cfg.d, cfg.d)
    lambdas = [_parametro(rng.normal(0.0, DESVIO_LAMBDA, size=(cfg.h, cfg.d_h))) for _ in range(4)]
    return DiffAttentionParams(
        Wq=projecoes[0],
        Wk=projecoes[1],
        Wv=projecoes[2],
        Wo=saida,
        lambda_q1=lambdas[0],
        lambda_k1=lambdas[1],
        lambda_q2=lambdas[2],
        lambda_k2=lambdas[3],
        rms_gain=_parametro(np.ones((cfg.h, 2 * cfg.d_h))),
        lambda_init=lambda_init_schedule(l),
    )


def inicializar_parametros(cfg: ModelConfig) -> WDformerParameters:
    """Sorteia todos os pesos a partir de ``cfg.seed``; mesma semente, mesmos parâmetros."""
    violacoes = cfg.validar()
    if violacoes:
        raise ErroConfiguracao(violacoes)
    if cfg.usa_wavelet and (cfg.K_efetivo != cfg.K or cfg.F_efetivo != cfg.F):
        logger.warning(f'Preenchendo por replicação da borda: K {cfg.K}->{cfg.K_efetivo}, F {cfg.F}->{cfg.F_efetivo} (múltiplos de 2^L={cfg.passo})')
    rng = np.random.default_rng(cfg.seed)

    embedding: WaveletEmbeddingParams | ParametrosLinear
    if cfg.usa_wavelet:
        comprimentos = comprimentos_niveis(cfg.K_efetivo, cfg.L)
        larguras = larguras_embedding(cfg.d, cfg.L)
        embedding = WaveletEmbeddingParams(
            maps=[_linear_uniforme(rng, entrada, saida) for entrada, saida in zip(comprimentos, larguras, strict=True)]
        )
        comprimento_saida = cfg.F_efetivo
    else:
        embedding = _linear_uniforme(rng, cfg.K, cfg.d)
        comprimento_saida = cfg.F

    camadas = [
        EncoderLayer(
            layer_index=l,
            attention=_atencao_inicial(rng, cfg, l),
            ffn_in=_linear_uniforme(rng, cfg.d, cfg.d_ff),
            ffn_out=_linear_uniforme(rng, cfg.d_ff, cfg.d),
            norm1=_norma(cfg.d),
            norm2=_norma(cfg.d),
        )
        for l in range(1, cfg.e_layers + 1)
    ]
    return WDformerParameters(embedding=embedding, layers=camadas, head=_linear_uniforme(rng, cfg.d, comprimento_saida))


def _mapear(objeto: Any, funcao: Callable[[str, TensorNode], TensorNode], prefixo: str = '') -> Any:
    if isinstance(objeto, TensorNode):
        return funcao(prefixo, objeto)
    if isinstance(objeto, list):
        return [_mapear(item, funcao, f'{prefixo}{i}.') for i, item in enumerate(objeto)]
    if is_dataclass(objeto):
        trocas = {campo.name: _mapear(getattr(objeto, campo.name), funcao, f'{prefixo}{campo.name}.') for campo in fields(objeto)}
        return replace(objeto, **trocas)
    return objeto


def named_parameters(params: WDformerParameters) -> list[tuple[str, TensorNode]]:
    """Pares (caminho pontuado, tensor) em ordem estável, p.ex. ``layers.0.attention.Wq``."""
    nomeados: list[tuple[str, TensorNode]] = []

    def coletar(nome: str, no: TensorNode) -> TensorNode:
        nomeados.append((nome.rstrip('.'), no))
        return no

    _mapear(params, coletar)
    return nomeados


def mapear_parametros(params: WDformerParameters, funcao: Callable[[str, TensorNode], TensorNode]) -> WDformerParameters:
    """Reconstrói o conjunto trocando cada tensor por ``funcao(nome, tensor)``."""
    return _mapear(params, lambda nome, no: funcao(nome.rstrip('.'), no))


def copiar_parametros(params: WDformerParameters) -> WDformerParameters:
    return mapear_parametros(params, lambda _, no: TensorNode(no.values.copy(), requires_grad=True))


def parameters_to_vector(params: WDformerParameters) -> np.ndarray:
    return np.concatenate([no.values.reshape(-1) for _, no in named_parameters(params)])


def parameters_from_vector(params: WDformerParameters, vetor: TensorNode) -> WDformerParameters:
    """Fatias de ``vetor`` (possivelmente na fita) remontadas com as formas de ``params``."""
    posicao = 0

    def fatia(_: str, no: TensorNode) -> TensorNode:
        nonlocal posicao
        tamanho = int(np.prod(no.shape))
        pedaco = vetor[posicao : posicao + tamanho].reshape(no.shape)
        posicao += tamanho
        return pedaco

    return mapear_parametros(params, fatia)


# ---------------------------------------------------------------------------
# Embedding wavelet
# ---------------------------------------------------------------------------


def wavelet_embed(x_window: np.ndarray, p: WaveletEmbeddingParams, cfg: ModelConfig) -> TensorNode:
    """DWT por variável ao longo do tempo, um mapa linear por conjunto e concatenação até largura d."""
    filtro = get_filter(cfg.wavelet_family)
    coeficientes = dwt_multilevel(x_window, cfg.L, filtro)
    if len(coeficientes.sets) != len(p.maps):
        raise ErroConfiguracao(f'{len(coeficientes.sets)} conjuntos de coeficientes para {len(p.maps)} mapas de embedding')
    partes = [linear(TensorNode(conjunto), mapa.weight, mapa.bias) for conjunto, mapa in zip(coeficientes.sets, p.maps, strict=True)]
    return concat(partes, eixo=-1)


# ---------------------------------------------------------------------------
# Atenção diferencial
# ---------------------------------------------------------------------------


def compute_lambda(p: DiffAttentionParams) -> TensorNode:
    """λ por cabeça: ``exp(λq1·λk1) − exp(λq2·λk2) + λ_init``."""
    primeiro = exp(soma(p.lambda_q1 * p.lambda_k1, eixo=-1))
    segundo = exp(soma(p.lambda_q2 * p.lambda_k2, eixo=-1))
    return primeiro - segundo + p.lambda_init


def _scores(q: TensorNode, k: TensorNode, d_h: int, contador: ContadorAtencao | None) -> TensorNode:
    if contador is not None:
        contador.registrar(q, k)
    return softmax_rows(matmul(q, trocar_ultimos(k)) * (1.0 / math.sqrt(d_h)))


def _atencao_diferencial(
    q1: TensorNode,
    k1: TensorNode,
    q2: TensorNode,
    k2: TensorNode,
    v: TensorNode,
    lam: TensorNode,
    d_h: int,
    contador: ContadorAtencao | None = None,
) -> TensorNode:
    combinada = _scores(q1, k1, d_h, contador) - lam * _scores(q2, k2, d_h, contador)
    return matmul(combinada, v)


def diff_attention_head(
    X_en: TensorNode | np.ndarray,
    p: DiffAttentionParams,
    cabeca: int,
    contador: ContadorAtencao | None = None,
) -> TensorNode:
    """Saída ``(A₁ − λ·A₂)·V`` de uma cabeça, com largura 2·d_h."""
    x = X_en if isinstance(X_en, TensorNode) else TensorNode(X_en)
    d_h = p.d_h
    q = matmul(x, p.Wq)
    k = matmul(x, p.Wk)
    v = matmul(x, p.Wv)
    ramo_1 = slice((2 * cabeca) * d_h, (2 * cabeca + 1) * d_h)
    ramo_2 = slice((2 * cabeca + 1) * d_h, (2 * cabeca + 2) * d_h)
    colunas_v = slice(2 * cabeca * d_h, 2 * (cabeca + 1) * d_h)
    lam = compute_lambda(p)[cabeca]
    return _atencao_diferencial(
        q[..., ramo_1], k[..., ramo_1], q[..., ramo_2], k[..., ramo_2], v[..., colunas_v], lam, d_h, contador
    )


def _separar_cabecas(x: TensorNode, p: DiffAttentionParams) -> tuple[TensorNode, TensorNode, TensorNode]:
    """Projeta ``x[B×N×d]`` em Q e K ``[B×h×2×N×d_h]`` e V ``[B×h×N×2d_h]``."""
    lote, tokens = x.shape[0], x.shape[1]
    h, d_h = p.h, p.d_h
    q = matmul(x, p.Wq).reshape(lote, tokens, h, 2, d_h).transpose(0, 2, 3, 1, 4)
    k = matmul(x, p.Wk).reshape(lote, tokens, h, 2, d_h).transpose(0, 2, 3, 1, 4)
    v = matmul(x, p.Wv).reshape(lote, tokens, h, 2 * d_h).transpose(0, 2, 1, 3)
    return q, k, v


def _juntar_cabecas(cabecas: TensorNode) -> TensorNode:
    lote, h, tokens, largura = cabecas.shape
    return cabecas.transpose(0, 2, 1, 3).reshape(lote, tokens, h * largura)


def _em_lote(funcao: Callable[[TensorNode], TensorNode], X_en: TensorNode | np.ndarray) -> TensorNode:
    x = X_en if isinstance(X_en, TensorNode) else TensorNode(X_en)
    if x.ndim == 2:
        return funcao(x.reshape(1, *x.shape))[0]
    return funcao(x)


def multi_head_diff_attention(
    X_en: TensorNode | np.ndarray,
    p: DiffAttentionParams,
    cfg: ModelConfig | None = None,
    contador: ContadorAtencao | None = None,
) -> TensorNode:
    """h cabeças diferenciais, RMSNorm por cabeça, escala (1−λ_init), concatenação e Wo."""

    def calcular(x: TensorNode) -> TensorNode:
        q, k, v = _separar_cabecas(x, p)
        lam = compute_lambda(p).reshape(p.h, 1, 1)
        cabecas = _atencao_diferencial(q[:, :, 0], k[:, :, 0], q[:, :, 1], k[:, :, 1], v, lam, p.d_h, contador)
        normalizadas = rms_norm(cabecas, p.rms_gain.reshape(p.h, 1, 2 * p.d_h), EPS_RMS_NORM) * (1.0 - p.lambda_init)
        return linear(_juntar_cabecas(normalizadas), p.Wo.weight, p.Wo.bias)

    return _em_lote(calcular, X_en)


def multi_head_attention(
    X_en: TensorNode | np.ndarray,
    p: DiffAttentionParams,
    contador: ContadorAtencao | None = None,
) -> TensorNode:
    """Atenção softmax padrão com um só ramo (Q₁, K₁); sem λ nem RMSNorm por cabeça."""

    def calcular(x: TensorNode) -> TensorNode:
        q, k, v = _separar_cabecas(x, p)
        cabecas = matmul(_scores(q[:, :, 0], k[:, :, 0], p.d_h, contador), v)
        return linear(_juntar_cabecas(cabecas), p.Wo.weight, p.Wo.bias)

    return _em_lote(calcular, X_en)


# ---------------------------------------------------------------------------
# Encoder e previsão
# ---------------------------------------------------------------------------


def encoder_layer_forward(
    x: TensorNode,
    layer: EncoderLayer,
    cfg: ModelConfig,
    treinando: bool = False,
    rng: np.random.Generator | None = None,
    contador: ContadorAtencao | None = None,
    diferencial: bool | None = None,
) -> TensorNode:
    """Blocos residuais pós-norma: ``y = Norm(x + MHDA(x))``, ``saída = Norm(y + FFN(y))``."""
    diferencial = cfg.usa_diferencial if diferencial is None else diferencial
    if diferencial:
        atencao = multi_head_diff_attention(x, layer.attention, cfg, contador)
    else:
        atencao = multi_head_attention(x, layer.attention, contador)
    y = layer_norm(x + dropout(atencao, cfg.dropout, rng, treinando), layer.norm1.gain, layer.norm1.bias, EPS_LAYER_NORM)
    oculto = gelu(linear(y, layer.ffn_in.weight, layer.ffn_in.bias))
    alimentado = linear(oculto, layer.ffn_out.weight, layer.ffn_out.bias)
    return layer_norm(y + dropout(alimentado, cfg.dropout, rng, treinando), layer.norm2.gain, layer.norm2.bias, EPS_LAYER_NORM)


def _sintetizar(coeficientes: TensorNode, cfg: ModelConfig) -> TensorNode:
    """IDWT multinível na fita: SplitWave e síntese de cada conjunto pelas suas linhas de M.

    Com M ortogonal e ``[aprox_L, detalhe_L, ..., detalhe_1] = M @ x``, o sinal
    é ``Σ_j c_j @ M_j``, onde M_j é o bloco de linhas de M do conjunto j.
    """
    F = cfg.F_efetivo
    sintese = analysis_matrix(F, cfg.L, get_filter(cfg.wavelet_family))
    conjuntos = split_wave(coeficientes, F, cfg.L).sets
    blocos = split_wave(sintese.T, F, cfg.L).sets
    partes = [matmul(conjunto, TensorNode(np.ascontiguousarray(bloco.T))) for conjunto, bloco in zip(conjuntos, blocos, strict=True)]
    sinal = partes[0]
    for parte in partes[1:]:
        sinal = sinal + parte
    return sinal


def forward_ablated(
    x_window: np.ndarray,
    params: WDformerParameters,
    cfg: ModelConfig,
    variant: str,
    treinando: bool = False,
    rng: np.random.Generator | None = None,
    contador: ContadorAtencao | None = None,
) -> TensorNode:
    """Previsão ``[..., N, F]`` com os módulos wavelet e/ou diferencial removidos conforme a variante."""
    if variant not in VARIANTES:
        raise ErroConfiguracao(f'variante {variant!r} inválida; use uma de {VARIANTES}')
    usa_wavelet = variant in ('full', 'no_diff')
    diferencial = variant in ('full', 'no_wave')
    if usa_wavelet != isinstance(params.embedding, WaveletEmbeddingParams):
        raise ErroConfiguracao(f'parâmetros construídos para a variante {cfg.variant!r} não servem para {variant!r}')

    x = np.asarray(x_window, dtype=np.float64)
    em_lote = x.ndim == 3
    if not em_lote:
        x = x[None]
    if x.shape[-1] != cfg.K:
        raise ErroConfiguracao(f'janela com {x.shape[-1]} passos, modelo espera K={cfg.K}')

    if cfg.instance_norm:
        media = x.mean(axis=-1, keepdims=True)
        desvio = np.sqrt(x.var(axis=-1, keepdims=True) + EPS_NORMALIZACAO_INSTANCIA)
        x = (x - media) / desvio

    if usa_wavelet:
        x_preenchido, _ = pad_to_divisible(x, cfg.L)
        tokens = wavelet_embed(x_preenchido, params.embedding, cfg)  # type: ignore[arg-type]
    else:
        tokens = linear(TensorNode(x), params.embedding.weight, params.embedding.bias)  # type: ignore[union-attr]

    for camada in params.layers:
        tokens = encoder_layer_forward(tokens, camada, cfg, treinando, rng, contador, diferencial)

    previsao = linear(tokens, params.head.weight, params.head.bias)
    if usa_wavelet:
        previsao = _sintetizar(previsao, cfg)[..., : cfg.F]

    if cfg.instance_norm:
        previsao = previsao * desvio + media
    return previsao if em_lote else previsao[0]


def forward(
    x_window: np.ndarray,
    params: WDformerParameters,
    cfg: ModelConfig,
    treinando: bool = False,
    rng: np.random.Generator | None = None,
    contador: ContadorAtencao | None = None,
) -> TensorNode:
    """Pipeline completo: embedding wavelet, encoder diferencial, projeção, SplitWave e IDWT."""
    return forward_ablated(x_window, params, cfg, 'full', treinando, rng, contador)
