"""Suítes de autoverificação: reconstrução wavelet, identidades da atenção, agenda de λ e gradientes."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .config import FAMILIAS_WAVELET
from .erros import ErroAutoteste
from .modelo import (
    DiffAttentionParams,
    compute_lambda,
    diff_attention_head,
    forward_ablated,
    inicializar_parametros,
    lambda_init_schedule,
    parameters_from_vector,
    parameters_to_vector,
)
from .numerics import TensorNode, gelu, grad_check, layer_norm, matmul, mse_loss, rms_norm, softmax_rows
from .tipos import ModelConfig
from .wavelet import dwt_multilevel, get_filter, idwt_multilevel

logger = logging.getLogger(__name__)

TOLERANCIA_RECONSTRUCAO = 1e-9
TOLERANCIA_PARSEVAL = 1e-9
TOLERANCIA_GRADIENTE = 1e-4
SINAIS_RECONSTRUCAO = 100
COMPRIMENTO_RECONSTRUCAO = 96


@dataclass
class ResultadoSuite:
    suite: str
    aprovada: bool
    detalhe: str = ''


def suite_reconstrucao(perturbacao: float = 0.0, seed: int = 0) -> list[str]:
    """IDWT(DWT(x)) = x e conservação de energia em 100 sinais de comprimento 96, por família e L = 1..3."""
    rng = np.random.default_rng(seed)
    falhas: list[str] = []
    for familia in FAMILIAS_WAVELET:
        filtro = get_filter(familia, perturbacao)
        for L in (1, 2, 3):
            x = rng.standard_normal((SINAIS_RECONSTRUCAO, COMPRIMENTO_RECONSTRUCAO))
            coeficientes = dwt_multilevel(x, L, filtro)
            erro = float(np.max(np.abs(idwt_multilevel(coeficientes, filtro) - x)))
            if erro > TOLERANCIA_RECONSTRUCAO:
                falhas.append(f'{familia} L={L}: erro de reconstrução {erro:.3e}')
            energia = abs(coeficientes.energia() - float(np.sum(x**2)))
            if energia > TOLERANCIA_PARSEVAL * max(1.0, float(np.sum(x**2))):
                falhas.append(f'{familia} L={L}: energia difere em {energia:.3e}')
    return falhas


def _atencao_padrao(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    scores = q @ k.T / np.sqrt(q.shape[-1])
    pesos = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return (pesos / pesos.sum(axis=-1, keepdims=True)) @ v


def suite_atencao(seed: int = 0) -> list[str]:
    """Colapso com λ=0, ramos compartilhados, somas de linha iguais a 1−λ e um caso inteiro feito à mão."""
    cfg = ModelConfig(K=8, F=8, N=5, L=1, d=8, h=2, e_layers=1, d_ff=8, dropout=0.0, seed=seed)
    p = inicializar_parametros(cfg).layers[0].attention
    d_h = p.d_h
    X = np.random.default_rng(seed).standard_normal((cfg.N, cfg.d))
    falhas: list[str] = []

    zeros = TensorNode(np.zeros((p.h, d_h)))
    colapsada = replace(p, lambda_q1=zeros, lambda_k1=zeros, lambda_q2=zeros, lambda_k2=zeros, lambda_init=0.0)
    q, k, v = X @ p.Wq.values, X @ p.Wk.values, X @ p.Wv.values
    for cabeca in range(p.h):
        ramo_1 = slice(2 * cabeca * d_h, (2 * cabeca + 1) * d_h)
        referencia = _atencao_padrao(q[:, ramo_1], k[:, ramo_1], v[:, 2 * cabeca * d_h : 2 * (cabeca + 1) * d_h])
        erro = float(np.max(np.abs(diff_attention_head(X, colapsada, cabeca).values - referencia)))
        if erro > 1e-12:
            falhas.append(f'cabeça {cabeca}: λ=0 difere da atenção padrão em {erro:.3e}')

    Wq, Wk = p.Wq.values.copy(), p.Wk.values.copy()
    for cabeca in range(p.h):
        ramo_1 = slice(2 * cabeca * d_h, (2 * cabeca + 1) * d_h)
        ramo_2 = slice((2 * cabeca + 1) * d_h, (2 * cabeca + 2) * d_h)
        Wq[:, ramo_2], Wk[:, ramo_2] = Wq[:, ramo_1], Wk[:, ramo_1]
    compartilhada = replace(p, Wq=TensorNode(Wq), Wk=TensorNode(Wk))
    lambdas = compute_lambda(p).values
    q, k = X @ Wq, X @ Wk
    for cabeca in range(p.h):
        ramo_1 = slice(2 * cabeca * d_h, (2 * cabeca + 1) * d_h)
        v_cabeca = v[:, 2 * cabeca * d_h : 2 * (cabeca + 1) * d_h]
        esperado = (1.0 - lambdas[cabeca]) * _atencao_padrao(q[:, ramo_1], k[:, ramo_1], v_cabeca)
        erro = float(np.max(np.abs(diff_attention_head(X, compartilhada, cabeca).values - esperado)))
        if erro > 1e-10:
            falhas.append(f'cabeça {cabeca}: ramos iguais diferem de (1−λ)·atenção em {erro:.3e}')

    for cabeca in range(p.h):
        somas = _somas_linhas_combinadas(X, p, cabeca)
        erro = float(np.max(np.abs(somas - (1.0 - lambdas[cabeca]))))
        if erro > 1e-8:
            falhas.append(f'cabeça {cabeca}: somas de linha diferem de 1−λ em {erro:.3e}')

    erro = _erro_caso_inteiro(p)
    if erro > 1e-10:
        falhas.append(f'caso inteiro N=2, d_h=2, λ=0.5: difere da conta à mão em {erro:.3e}')
    return falhas


# Q₁|Q₂, K₁|K₂ e V de um caso com N=2 e d_h=2; com X = I as projeções são as próprias matrizes
Q_INTEIRO = np.array([[1.0, 0.0, 2.0, -1.0], [0.0, 1.0, 1.0, 1.0]])
K_INTEIRO = np.array([[1.0, 2.0, 0.0, 1.0], [-1.0, 0.0, 1.0, 1.0]])
V_INTEIRO = np.array([[1.0, 2.0, 3.0, 4.0], [-2.0, 0.0, 1.0, -1.0]])


def _atencao_a_mao(q: list[list[float]], k: list[list[float]]) -> list[list[float]]:
    """Matriz softmax(q·kᵀ/√d_h) entrada a entrada, sem álgebra vetorizada."""
    tokens, largura = len(q), len(q[0])
    matriz = []
    for i in range(tokens):
        scores = [sum(q[i][c] * k[j][c] for c in range(largura)) / math.sqrt(largura) for j in range(tokens)]
        exponenciais = [math.exp(s) for s in scores]
        total = sum(exponenciais)
        matriz.append([e / total for e in exponenciais])
    return matriz


def _erro_caso_inteiro(p: DiffAttentionParams) -> float:
    """Compara a cabeça diferencial com A₁ e A₂ materializadas e multiplicadas por V à mão."""
    lam = 0.5
    zeros = TensorNode(np.zeros((1, 2)))
    caso = replace(
        p,
        Wq=TensorNode(Q_INTEIRO),
        Wk=TensorNode(K_INTEIRO),
        Wv=TensorNode(V_INTEIRO),
        lambda_q1=zeros,
        lambda_k1=zeros,
        lambda_q2=zeros,
        lambda_k2=zeros,
        lambda_init=lam,
    )
    A1 = _atencao_a_mao(Q_INTEIRO[:, :2].tolist(), K_INTEIRO[:, :2].tolist())
    A2 = _atencao_a_mao(Q_INTEIRO[:, 2:].tolist(), K_INTEIRO[:, 2:].tolist())
    esperado = [
        [sum((A1[i][j] - lam * A2[i][j]) * V_INTEIRO[j][c] for j in range(2)) for c in range(4)] for i in range(2)
    ]
    obtido = diff_attention_head(np.eye(2), caso, 0).values
    return float(np.max(np.abs(obtido - np.array(esperado))))


def _somas_linhas_combinadas(X: np.ndarray, p: DiffAttentionParams, cabeca: int) -> np.ndarray:
    """Somas de linha de A₁ − λA₂, obtidas com V constante igual a 1."""
    d_h = p.d_h
    Wv = np.zeros_like(p.Wv.values)
    Xu = np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)
    Wv = np.concatenate([Wv, np.zeros((1, Wv.shape[1]))], axis=0)
    Wv[-1, 2 * cabeca * d_h] = 1.0
    estendida = replace(
        p,
        Wq=TensorNode(np.concatenate([p.Wq.values, np.zeros((1, p.Wq.shape[1]))], axis=0)),
        Wk=TensorNode(np.concatenate([p.Wk.values, np.zeros((1, p.Wk.shape[1]))], axis=0)),
        Wv=TensorNode(Wv),
    )
    return diff_attention_head(Xu, estendida, cabeca).values[:, 0]


def suite_lambda() -> list[str]:
    falhas: list[str] = []
    for camada, esperado in ((1, 0.2), (2, 0.7 - 0.5 * np.exp(-0.3))):
        if abs(lambda_init_schedule(camada) - esperado) > 1e-12:
            falhas.append(f'λ_init({camada}) = {lambda_init_schedule(camada)} != {esperado}')
    valores = [lambda_init_schedule(l) for l in range(1, 13)]
    if any(b <= a for a, b in zip(valores, valores[1:], strict=False)) or valores[-1] >= 0.7:
        falhas.append('λ_init não é crescente e limitada por 0.7')
    return falhas


def suite_gradientes(seed: int = 0) -> list[str]:
    """Diferenças centrais contra a fita, primitiva a primitiva e no modelo inteiro em dimensões de brinquedo."""
    rng = np.random.default_rng(seed)
    constante = TensorNode(rng.standard_normal((4, 3)))
    ganho, vies = TensorNode(rng.standard_normal(5)), TensorNode(rng.standard_normal(5))
    casos: dict[str, tuple[Callable[[TensorNode], TensorNode], np.ndarray]] = {
        'matmul': (lambda x: mse_loss(matmul(x, constante), 0.0), rng.standard_normal((2, 4))),
        'softmax_rows': (lambda x: mse_loss(softmax_rows(x), 0.1), rng.standard_normal((3, 5))),
        'rms_norm': (lambda x: mse_loss(rms_norm(x, ganho, 1e-5), 0.2), rng.standard_normal((3, 5))),
        'layer_norm': (lambda x: mse_loss(layer_norm(x, ganho, vies, 1e-5), 0.3), rng.standard_normal((3, 5))),
        'gelu': (lambda x: mse_loss(gelu(x), 0.0), rng.standard_normal((3, 4))),
    }

    for variante in ('full', 'no_diff'):
        cfg = ModelConfig(K=8, F=8, N=3, L=1, d=8, h=2, e_layers=1, d_ff=8, dropout=0.0, seed=seed, variant=variante)
        params = inicializar_parametros(cfg)
        X, Y = rng.standard_normal((2, cfg.N, cfg.K)), rng.standard_normal((2, cfg.N, cfg.F))

        def perda_modelo(v: TensorNode, cfg: ModelConfig = cfg, params=params, X=X, Y=Y) -> TensorNode:
            return mse_loss(forward_ablated(X, parameters_from_vector(params, v), cfg, cfg.variant), Y)

        casos[f'modelo {variante}'] = (perda_modelo, parameters_to_vector(params))

    falhas: list[str] = []
    for nome, (funcao, ponto) in casos.items():
        erro = grad_check(funcao, ponto)
        logger.debug(f'grad_check {nome}: {erro:.3e}')
        if erro >= TOLERANCIA_GRADIENTE:
            falhas.append(f'{nome}: erro relativo {erro:.3e}')
    return falhas


def executar_autoteste(perturbacao: float = 0.0) -> list[ResultadoSuite]:
    """Roda todas as suítes e devolve um resultado por suíte; ``verificar`` decide a falha."""
    suites: dict[str, Callable[[], list[str]]] = {
        'reconstrucao': lambda: suite_reconstrucao(perturbacao),
        'atencao': suite_atencao,
        'lambda': suite_lambda,
        'gradientes': suite_gradientes,
    }
    resultados = []
    for nome, suite in suites.items():
        falhas = suite()
        resultados.append(ResultadoSuite(nome, not falhas, '; '.join(falhas)))
        logger.info(f'Suíte {nome}: {"ok" if not falhas else "FALHOU"}')
    return resultados


def verificar(resultados: list[ResultadoSuite]) -> None:
    reprovadas = [resultado for resultado in resultados if not resultado.aprovada]
    if reprovadas:
        raise ErroAutoteste(','.join(r.suite for r in reprovadas), reprovadas[0].detalhe)
