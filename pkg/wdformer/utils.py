"""Funções utilitárias para manipulação de caminhos."""

from pathlib import Path

from .erros import ErroConfiguracao


def garantir_caminho_absoluto(caminho: str | Path) -> str:
    """Garante que o caminho seja absoluto"""
    objeto_caminho = Path(caminho)
    if not objeto_caminho.is_absolute():
        objeto_caminho = objeto_caminho.resolve()
    return str(objeto_caminho.absolute())


def caminho_na_saida(pasta_saida: str | Path, nome: str) -> str:
    """Resolve `nome` dentro da pasta de saída, recusando qualquer escape dela."""
    pasta = Path(garantir_caminho_absoluto(pasta_saida)).resolve()
    destino = (pasta / nome).resolve()
    if pasta != destino and pasta not in destino.parents:
        raise ErroConfiguracao(f'caminho {destino} fora da pasta de saída {pasta}')
    return str(destino)
