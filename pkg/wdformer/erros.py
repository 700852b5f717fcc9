"""Exceções do WDformer e seus códigos de saída."""

from .config import SAIDA_AUTOTESTE, SAIDA_CONFIGURACAO, SAIDA_DADOS, SAIDA_NUMERICO


class ErroWDformer(Exception):
    """Base de todos os erros esperados; carrega o código de saída da CLI."""

    codigo: int = SAIDA_CONFIGURACAO
    tipo: str = 'configuracao'


class ErroConfiguracao(ErroWDformer):
    """Configuração inválida ou incompatível com os dados."""

    def __init__(self, violacoes: str | list[str]) -> None:
        self.violacoes: list[str] = [violacoes] if isinstance(violacoes, str) else list(violacoes)
        super().__init__('; '.join(self.violacoes))


class ErroDados(ErroWDformer):
    """Arquivo ausente, célula não numérica, linhas irregulares ou variável constante."""

    codigo = SAIDA_DADOS
    tipo = 'dados'


class ErroNumerico(ErroWDformer):
    """Gradiente NaN, perda divergente ou valor não finito."""

    codigo = SAIDA_NUMERICO
    tipo = 'numerico'


class ErroAutoteste(ErroWDformer):
    """Uma das suítes de autoverificação falhou."""

    codigo = SAIDA_AUTOTESTE
    tipo = 'autoteste'

    def __init__(self, suite: str, detalhe: str = '') -> None:
        self.suite = suite
        super().__init__(f'{suite}: {detalhe}' if detalhe else suite)


class ErroDimensao(ValueError):
    """Formas incompatíveis numa operação tensorial."""


class ErroComprimento(ValueError):
    """Comprimento de sinal incompatível com a transformada wavelet."""


class ErroCodificacao(ErroDados):
    """Byte que o encoding detectado na amostra não decodifica."""

    def __init__(self, caminho: str, encoding: str, posicao: int | None) -> None:
        self.encoding = encoding
        self.posicao = posicao
        onde = f'no byte {posicao}' if posicao is not None else 'em posição desconhecida'
        super().__init__(f'{caminho} não decodifica como {encoding} {onde}')
