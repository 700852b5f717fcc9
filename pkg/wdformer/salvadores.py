import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd  # type: ignore[import]
import pyarrow as pa  # type: ignore[import]

from .config import FORMATO_CHECKPOINT, VERSAO_CHECKPOINT
from .erros import ErroDados
from .modelo import WDformerParameters, inicializar_parametros, mapear_parametros, named_parameters
from .numerics import TensorNode
from .tipos import ForecastReport, ModelConfig, RunReport, Scaler
from .utils import caminho_na_saida, garantir_caminho_absoluto


class Salvadores:
    """Classe responsável por gravar checkpoints, relatórios e previsões dentro da pasta de saída."""

    def __init__(self, pasta_saida: str) -> None:
        """Inicializa os salvadores"""
        self.pasta_saida = garantir_caminho_absoluto(pasta_saida)

    def _destino(self, nome: str) -> str:
        caminho = caminho_na_saida(self.pasta_saida, nome)
        Path(caminho).parent.mkdir(parents=True, exist_ok=True)
        return caminho

    def salvar_checkpoint(self, params: WDformerParameters, cfg: ModelConfig, scaler: Scaler | None, nome: str) -> str:
        """Salva parâmetros nomeados, configuração e escalador num arquivo Arrow IPC."""
        caminho = self._destino(nome)
        nomeados = named_parameters(params)
        tabela = pa.table(
            {
                "name": pa.array([nome_parametro for nome_parametro, _ in nomeados], type=pa.string()),
                "shape": pa.array([list(no.shape) for _, no in nomeados], type=pa.list_(pa.int64())),
                "values": pa.array([no.values.reshape(-1).tolist() for _, no in nomeados], type=pa.list_(pa.float64())),
            }
        )
        metadados = {
            "formato": FORMATO_CHECKPOINT,
            "versao": str(VERSAO_CHECKPOINT),
            "config": json.dumps(cfg.como_dict(), sort_keys=True),
            "scaler_mean": json.dumps(scaler.mean.tolist() if scaler is not None else None),
            "scaler_std": json.dumps(scaler.std.tolist() if scaler is not None else None),
        }
        tabela = tabela.replace_schema_metadata(metadados)
        try:
            with pa.OSFile(caminho, "wb") as destino, pa.ipc.new_file(destino, tabela.schema) as escritor:
                escritor.write_table(tabela)
        except OSError as erro:
            logging.error(f"Erro ao salvar checkpoint {caminho}: {str(erro)}")
            raise
        logging.info(f"Checkpoint salvo em {caminho} ({len(nomeados)} tensores)")
        return caminho

    def salvar_relatorio(self, relatorio: RunReport, nome: str) -> str:
        """Relatório em texto: linhas ``chave = valor`` seguidas da tabela de épocas."""
        caminho = self._destino(nome)
        linhas = [
            f"variant = {relatorio.variant}",
            f"horizon = {relatorio.horizon}",
            f"seed = {relatorio.seed}",
            f"best_epoch = {relatorio.best_epoch}",
            f"best_val_loss = {relatorio.best_val_loss!r}",
            f"test_mse = {relatorio.test_mse!r}",
            f"test_mae = {relatorio.test_mae!r}",
            f"baseline_mse = {relatorio.baseline_mse!r}",
            f"baseline_mae = {relatorio.baseline_mae!r}",
            f"config = {json.dumps(relatorio.config, sort_keys=True)}",
            "",
            "epoch,train_loss,val_loss",
        ]
        linhas += [
            f"{epoca},{treino!r},{validacao!r}"
            for epoca, (treino, validacao) in enumerate(zip(relatorio.train_losses, relatorio.val_losses, strict=True), start=1)
        ]
        try:
            Path(caminho).write_text("\n".join(linhas) + "\n", encoding="utf-8")
        except OSError as erro:
            logging.error(f"Erro ao salvar relatório {caminho}: {str(erro)}")
            raise
        return caminho

    def salvar_metricas(self, metricas: dict[str, object], nome: str) -> str:
        """Métricas em linhas ``chave = valor``, na ordem recebida."""
        caminho = self._destino(nome)
        try:
            Path(caminho).write_text("".join(f"{chave} = {valor!r}\n" for chave, valor in metricas.items()), encoding="utf-8")
        except OSError as erro:
            logging.error(f"Erro ao salvar métricas {caminho}: {str(erro)}")
            raise
        return caminho

    def salvar_epocas(self, relatorio: RunReport, nome: str) -> str:
        """Perdas por época em CSV (sem os tempos de parede)."""
        caminho = self._destino(nome)
        quadro = pd.DataFrame(
            {
                "epoch": np.arange(1, len(relatorio.train_losses) + 1),
                "train_loss": relatorio.train_losses,
                "val_loss": relatorio.val_losses,
            }
        )
        try:
            quadro.to_csv(caminho, index=False)
        except OSError as erro:
            logging.error(f"Erro ao salvar épocas {caminho}: {str(erro)}")
            raise
        return caminho

    def salvar_previsoes(self, previsoes: ForecastReport | np.ndarray, nomes: list[str], nome: str) -> str:
        """CSV longo com ``window_id, variate, step, prediction`` e, se houver verdade, ``truth``."""
        caminho = self._destino(nome)
        verdades = previsoes.truths if isinstance(previsoes, ForecastReport) else None
        valores = previsoes.predictions if isinstance(previsoes, ForecastReport) else np.asarray(previsoes)
        janelas, variaveis, passos = valores.shape
        if len(nomes) != variaveis:
            raise ErroDados(f"{len(nomes)} nomes de variável para {variaveis} variáveis previstas")

        colunas = {
            "window_id": np.repeat(np.arange(janelas), variaveis * passos),
            "variate": np.tile(np.repeat(np.asarray(nomes, dtype=object), passos), janelas),
            "step": np.tile(np.arange(1, passos + 1), janelas * variaveis),
            "prediction": valores.reshape(-1),
        }
        if verdades is not None:
            colunas["truth"] = np.asarray(verdades).reshape(-1)
        try:
            pd.DataFrame(colunas).to_csv(caminho, index=False)
        except OSError as erro:
            logging.error(f"Erro ao salvar previsões {caminho}: {str(erro)}")
            raise
        logging.info(f"Previsões salvas em {caminho} ({janelas} janela(s))")
        return caminho

    def salvar_tabela_ablacao(self, tabela: pd.DataFrame, seed: int, nome: str) -> str:
        """Tabela de ablação em CSV, precedida de uma linha de comentário com a semente comum."""
        caminho = self._destino(nome)
        try:
            with open(caminho, "w", encoding="utf-8", newline="") as arquivo_aberto:
                arquivo_aberto.write(f"# seed = {seed}\n")
                tabela.to_csv(arquivo_aberto, index=False)
        except OSError as erro:
            logging.error(f"Erro ao salvar tabela de ablação {caminho}: {str(erro)}")
            raise
        return caminho


def carregar_checkpoint(caminho: str) -> tuple[WDformerParameters, ModelConfig, Scaler | None]:
    """Lê um checkpoint Arrow e reconstrói parâmetros, configuração e escalador."""
    caminho_absoluto = garantir_caminho_absoluto(caminho)
    if not Path(caminho_absoluto).is_file():
        raise ErroDados(f"checkpoint não encontrado: {caminho_absoluto}")
    try:
        with pa.OSFile(caminho_absoluto, "rb") as origem:
            tabela = pa.ipc.open_file(origem).read_all()
    except (OSError, pa.ArrowInvalid) as erro:
        logging.error(f"Erro ao ler checkpoint {caminho_absoluto}: {str(erro)}")
        raise ErroDados(f"checkpoint ilegível: {caminho_absoluto}") from erro

    metadados = {chave.decode(): valor.decode() for chave, valor in (tabela.schema.metadata or {}).items()}
    if metadados.get("formato") != FORMATO_CHECKPOINT or metadados.get("versao") != str(VERSAO_CHECKPOINT):
        raise ErroDados(f"checkpoint {caminho_absoluto} com formato/versão desconhecidos")

    cfg = ModelConfig(**json.loads(metadados["config"]))
    media, desvio = json.loads(metadados["scaler_mean"]), json.loads(metadados["scaler_std"])
    scaler = Scaler(mean=np.array(media), std=np.array(desvio)) if media is not None else None

    colunas = tabela.to_pydict()
    tensores = {
        nome: np.array(valores, dtype=np.float64).reshape(forma)
        for nome, forma, valores in zip(colunas["name"], colunas["shape"], colunas["values"], strict=True)
    }
    modelo = inicializar_parametros(cfg)
    faltando = [nome for nome, _ in named_parameters(modelo) if nome not in tensores]
    if faltando:
        raise ErroDados(f"checkpoint sem os tensores {faltando[:5]}")

    def restaurar(nome: str, no: TensorNode) -> TensorNode:
        if tensores[nome].shape != no.shape:
            raise ErroDados(f"tensor {nome} com forma {list(tensores[nome].shape)}, esperado {list(no.shape)}")
        return TensorNode(tensores[nome], requires_grad=True)

    return mapear_parametros(modelo, restaurar), cfg, scaler


def ler_tabela_ablacao(caminho: str) -> tuple[int, pd.DataFrame]:
    """Lê de volta a semente comum e a tabela gravada por ``salvar_tabela_ablacao``."""
    with open(garantir_caminho_absoluto(caminho), encoding="utf-8") as arquivo_aberto:
        primeira = arquivo_aberto.readline()
        seed = int(primeira.split("=", 1)[1])
        tabela = pd.read_csv(arquivo_aberto)
    return seed, tabela
