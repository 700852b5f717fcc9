"""Leitura do arquivo de configuração ``chave = valor`` e sobreposição pelos argumentos da CLI.

Precedência: padrões < arquivo < argumentos. As chaves são pontuadas
(``model.K``, ``train.epochs``, ``data.path``, ``out_dir``); uma seção
``[model]`` vale como prefixo das chaves que contém.
"""

import configparser
import logging
import types
import typing
from dataclasses import fields, replace
from pathlib import Path
from typing import Any

from .erros import ErroConfiguracao
from .tipos import CliConfig, DataConfig, ModelConfig, TrainConfig
from .utils import garantir_caminho_absoluto

logger = logging.getLogger(__name__)

SECAO_RAIZ = "raiz"
GRUPOS: dict[str, type] = {"model": ModelConfig, "train": TrainConfig, "data": DataConfig}
VERDADEIROS: frozenset[str] = frozenset({"1", "true", "yes", "on", "sim"})
FALSOS: frozenset[str] = frozenset({"0", "false", "no", "off", "nao", "não"})
NULOS: frozenset[str] = frozenset({"", "none", "null"})


def _converter(texto: str, tipo: Any) -> Any:
    """Converte o texto para o tipo anotado do campo (int, float, bool, str, list[int], opcionais)."""
    texto = texto.strip()
    opcoes = typing.get_args(tipo)
    if isinstance(tipo, types.UnionType) or typing.get_origin(tipo) is typing.Union:
        if type(None) in opcoes and texto.lower() in NULOS:
            return None
        tipo = next(opcao for opcao in opcoes if opcao is not type(None))
        opcoes = typing.get_args(tipo)
    if typing.get_origin(tipo) is list:
        return [_converter(parte, opcoes[0]) for parte in texto.replace(";", ",").split(",") if parte.strip()]
    if tipo is bool:
        if texto.lower() in VERDADEIROS:
            return True
        if texto.lower() in FALSOS:
            return False
        raise ValueError(f"{texto!r} não é booleano")
    if tipo is int:
        return int(texto)
    if tipo is float:
        return float(texto)
    return texto


def _ler_arquivo(caminho: str) -> dict[str, str]:
    """Pares chave pontuada → texto, na ordem do arquivo."""
    caminho_absoluto = garantir_caminho_absoluto(caminho)
    if not Path(caminho_absoluto).is_file():
        raise ErroConfiguracao(f"arquivo de configuração não encontrado: {caminho_absoluto}")

    leitor = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    leitor.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        texto = Path(caminho_absoluto).read_text(encoding="utf-8")
        leitor.read_string(f"[{SECAO_RAIZ}]\n{texto}", source=caminho_absoluto)
    except configparser.Error as erro:
        raise ErroConfiguracao(f"arquivo de configuração malformado ({caminho_absoluto}): {erro}") from erro

    pares: dict[str, str] = {}
    for secao in leitor.sections():
        prefixo = "" if secao == SECAO_RAIZ else f"{secao}."
        for chave, valor in leitor.items(secao, raw=True):
            pares[f"{prefixo}{chave}"] = valor
    logger.debug(f"Configuração lida de {caminho_absoluto}: {sorted(pares)}")
    return pares


def _tipos_grupo(classe: type) -> dict[str, Any]:
    anotacoes = typing.get_type_hints(classe)
    return {campo.name: anotacoes[campo.name] for campo in fields(classe)}


def aplicar_pares(cfg: CliConfig, pares: dict[str, Any], violacoes: list[str] | None = None) -> CliConfig:
    """Aplica pares ``chave pontuada → valor`` (texto ou já tipado).

    Com ``violacoes``, as chaves ruins são anotadas nessa lista e as demais
    aplicadas; sem ela, qualquer violação levanta ``ErroConfiguracao``.
    """
    acumuladas: list[str] = [] if violacoes is None else violacoes
    inicio = len(acumuladas)
    trocas: dict[str, dict[str, Any]] = {grupo: {} for grupo in GRUPOS}
    out_dir = cfg.out_dir

    for chave, valor in pares.items():
        if chave == "out_dir":
            out_dir = str(valor)
            continue
        grupo, _, campo = chave.partition(".")
        tipos = _tipos_grupo(GRUPOS[grupo]) if grupo in GRUPOS else {}
        if campo not in tipos:
            acumuladas.append(f"chave desconhecida: {chave}")
            continue
        try:
            trocas[grupo][campo] = _converter(valor, tipos[campo]) if isinstance(valor, str) else valor
        except (ValueError, StopIteration) as erro:
            acumuladas.append(f"{chave}={valor!r}: {erro}")

    if violacoes is None and len(acumuladas) > inicio:
        raise ErroConfiguracao(acumuladas)
    return CliConfig(
        model=replace(cfg.model, **trocas["model"]),
        train=replace(cfg.train, **trocas["train"]),
        data=replace(cfg.data, **trocas["data"]),
        out_dir=out_dir,
    )


def carregar_configuracao(
    caminho: str | None,
    sobreposicoes: dict[str, Any] | None = None,
    exigir_dados: bool = True,
) -> CliConfig:
    """Padrões, depois o arquivo, depois os argumentos.

    Problemas do arquivo, das sobreposições e da validação final saem juntos
    num único ``ErroConfiguracao``.
    """
    violacoes: list[str] = []
    cfg = CliConfig()
    if caminho:
        try:
            cfg = aplicar_pares(cfg, _ler_arquivo(caminho), violacoes)
        except ErroConfiguracao as erro:
            violacoes.extend(erro.violacoes)
    if sobreposicoes:
        cfg = aplicar_pares(cfg, {chave: valor for chave, valor in sobreposicoes.items() if valor is not None}, violacoes)

    violacoes += cfg.validar(exigir_dados=exigir_dados)
    if violacoes:
        raise ErroConfiguracao(violacoes)
    return cfg
