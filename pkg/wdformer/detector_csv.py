"""Módulo para detecção automática de características de arquivos CSV de séries temporais."""

import gzip
import logging
from pathlib import Path
from typing import Any

try:
    import chardet  # type: ignore[import]

    CHARDET_DISPONIVEL = True
except ImportError:
    CHARDET_DISPONIVEL = False

BOMS_UTF16: tuple[bytes, ...] = (b"\xff\xfe", b"\xfe\xff")
CONFIANCA_MINIMA: float = 0.7
ENCODING_RESERVA: str = "ISO-8859-1"


def _e_numero(texto: str) -> bool:
    try:
        float(texto)
    except ValueError:
        return False
    return True


def _celulas(linha: str, delimitador: str) -> list[str]:
    return [celula.strip().strip('"') for celula in linha.split(delimitador)]


class DetectorCSV:
    """Classe responsável por detectar automaticamente características de arquivos CSV."""

    DELIMITADORES: tuple[str, ...] = (",", ";", "\t", "|")

    def __init__(self, amostra_bytes: int = 10000, linhas_analisadas: int = 5) -> None:
        self.logger = logging.getLogger(__name__)
        self.amostra_bytes = amostra_bytes
        self.linhas_analisadas = linhas_analisadas

    def _ler_amostra(self, caminho: Path) -> tuple[bytes, bool]:
        """Lê o início do arquivo (descompactando .gz) e informa se ele coube inteiro na amostra."""
        abrir = gzip.open if caminho.suffix == ".gz" else open
        with abrir(caminho, "rb") as arquivo:
            amostra = arquivo.read(self.amostra_bytes)
            completo = not arquivo.read(1)
        return amostra, completo

    def _detectar_encoding(self, amostra: bytes) -> str:
        if amostra.startswith(BOMS_UTF16):
            return "utf-16"
        try:
            amostra.decode("utf-8", errors="strict")
            return "utf-8"
        except UnicodeDecodeError:
            pass

        # ISO-8859-1 decodifica qualquer byte; só é trocado com confiança suficiente
        encoding = ENCODING_RESERVA
        if CHARDET_DISPONIVEL:
            resultado = chardet.detect(amostra)
            if resultado.get("encoding") and resultado.get("confidence", 0) >= CONFIANCA_MINIMA:
                encoding = resultado["encoding"]
        self.logger.debug(f"Encoding detectado: {encoding}")
        return encoding

    def _linhas(self, amostra: bytes, encoding: str, completo: bool) -> list[str]:
        """Decodifica a amostra inteira antes de quebrar em linhas (UTF-16 não pode ser cortado por byte)."""
        linhas = amostra.decode(encoding, errors="ignore").splitlines()
        if not completo and linhas:
            linhas = linhas[:-1]
        return [linha.strip() for linha in linhas if linha.strip()][: self.linhas_analisadas]

    def _detectar_delimitador(self, linhas: list[str]) -> str:
        contagens = {delim: sum(linha.count(delim) for linha in linhas) for delim in self.DELIMITADORES}
        delimitador = max(contagens, key=contagens.__getitem__)
        if contagens[delimitador] == 0:
            delimitador = ","
        self.logger.debug(f"Delimitador detectado: {delimitador!r}")
        return delimitador

    def _detectar_cabecalho(self, linhas: list[str], delimitador: str) -> bool:
        """Há cabeçalho quando a primeira linha tem células de valor não numéricas."""
        if not linhas:
            return False
        celulas = _celulas(linhas[0], delimitador)
        return not all(_e_numero(celula) for celula in celulas[1:] or celulas)

    def _detectar_coluna_tempo(self, linhas: list[str], delimitador: str, cabecalho: bool) -> bool:
        """A primeira coluna é carimbo de tempo quando sua primeira célula de dado não é numérica."""
        dados = linhas[1:] if cabecalho else linhas
        if not dados:
            return False
        return not _e_numero(_celulas(dados[0], delimitador)[0])

    def detectar_configuracao(self, caminho: str) -> dict[str, Any]:
        """Detecta encoding, delimitador, cabeçalho, coluna de tempo e compressão."""
        arquivo = Path(caminho).absolute().resolve()
        if not arquivo.exists():
            raise FileNotFoundError(f"Arquivo não encontrado: {arquivo}")

        self.logger.info(f"Detectando características do CSV: {arquivo.name}")

        try:
            amostra, completo = self._ler_amostra(arquivo)
        except OSError as erro:
            self.logger.error(f"Erro ao ler amostra de {arquivo.name}: {erro}")
            raise

        encoding = self._detectar_encoding(amostra)
        linhas = self._linhas(amostra, encoding, completo)
        delimitador = self._detectar_delimitador(linhas)
        cabecalho = self._detectar_cabecalho(linhas, delimitador)

        configuracao = {
            "encoding": encoding,
            "delimiter": delimitador,
            "header": cabecalho,
            "timestamp": self._detectar_coluna_tempo(linhas, delimitador, cabecalho),
            "compression": "gzip" if arquivo.suffix == ".gz" else None,
        }
        self.logger.info(f"Configuração detectada: {configuracao}")
        return configuracao
