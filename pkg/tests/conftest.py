import os
import sys
from pathlib import Path

import pytest

# Adicionar a raiz do repositório ao sys.path para importar o pacote sem instalação
RAIZ = Path(__file__).resolve().parent.parent
if str(RAIZ) not in sys.path:
    sys.path.insert(0, str(RAIZ))

from wdformer.tipos import ModelConfig, TrainConfig  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "lento: benchmark sintético completo (WDF_TESTES_LENTOS=1 para rodar)")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("WDF_TESTES_LENTOS") == "1":
        return
    pular = pytest.mark.skip(reason="defina WDF_TESTES_LENTOS=1 para rodar")
    for item in items:
        if "lento" in item.keywords:
            item.add_marker(pular)


@pytest.fixture
def cfg_brinquedo():
    return ModelConfig(K=8, F=8, N=3, L=1, d=8, h=2, e_layers=1, d_ff=8, dropout=0.0, seed=7)


@pytest.fixture
def treino_rapido():
    return TrainConfig(epochs=2, batch_size=16, learning_rate=1e-3, early_stop_patience=5, seed=7, progress=False)


@pytest.fixture
def escrever_csv(tmp_path):
    """Grava um CSV de texto em tmp_path e devolve o caminho."""

    def escrever(conteudo: str, nome: str = "serie.csv") -> str:
        caminho = tmp_path / nome
        caminho.write_text(conteudo, encoding="utf-8")
        return str(caminho)

    return escrever


@pytest.fixture
def csv_senoidal(tmp_path):
    """Série com carimbo de tempo, cabeçalho e duas variáveis (T=200)."""
    import numpy as np

    tempo = np.arange(200)
    linhas = ["date,a,b"]
    for t in tempo:
        linhas.append(f"2024-01-01 {t:04d},{np.sin(2 * np.pi * t / 16):.6f},{np.cos(2 * np.pi * t / 8) + 0.01 * t:.6f}")
    caminho = tmp_path / "senoides.csv"
    caminho.write_text("\n".join(linhas) + "\n", encoding="utf-8")
    return str(caminho)


@pytest.fixture
def csv_com_byte_latino(tmp_path):
    """CSV UTF-8 válido na amostra de detecção, com um byte Latin-1 (0xE9) só na última linha."""

    def escrever(ultima_linha: bytes, nome: str = "latino_no_fim.csv") -> tuple[str, int]:
        corpo = b"date,a,b\n" + b"".join(b"2024-01-01 %04d,0.%06d,1.%06d\n" % (t, t, t) for t in range(600))
        assert len(corpo) > 10000
        conteudo = corpo + ultima_linha
        caminho = tmp_path / nome
        caminho.write_bytes(conteudo)
        return str(caminho), conteudo.index(b"\xe9")

    return escrever
