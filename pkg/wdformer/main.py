"""Linha de comando do WDformer: train, eval, forecast, ablate e selftest.

Uso: ``python -m wdformer.main <comando> [opções]``. Falhas esperadas saem com
código 1 (configuração), 2 (dados), 3 (numérico) ou 4 (autoteste) e uma linha
``erro codigo=<n> tipo=<tipo> motivo=<mensagem>`` no stderr.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from .autoteste import executar_autoteste, verificar
from .config import (
    ARQUIVO_ABLACAO,
    ARQUIVO_AVALIACAO,
    ARQUIVO_CHECKPOINT,
    ARQUIVO_EPOCAS,
    ARQUIVO_PREVISOES,
    ARQUIVO_RELATORIO,
    FAMILIAS_WAVELET,
    REFERENCIA_ABLACAO,
    SAIDA_CONFIGURACAO,
    SAIDA_OK,
    VARIANTES,
)
from .configuracao import carregar_configuracao
from .dados import load_csv, synthetic_benchmark
from .erros import ErroComprimento, ErroDados, ErroDimensao, ErroWDformer
from .salvadores import Salvadores, carregar_checkpoint
from .tipos import CliConfig, ForecastReport, TimeSeriesDataset
from .treino import evaluate, forecast_report, metricas_ingenuas, preparar_dados, prever_serie, run_ablation, tabela_ablacao, train

logger = logging.getLogger(__name__)


def construir_parser() -> argparse.ArgumentParser:
    comum = argparse.ArgumentParser(add_help=False)
    comum.add_argument("--config", help="arquivo chave = valor (model.K, train.epochs, data.path, out_dir)")
    comum.add_argument("--data", help="CSV de entrada")
    comum.add_argument("--out", help="pasta de saída")
    comum.add_argument("--seed", type=int)
    comum.add_argument("--horizon", type=int, help="horizonte de previsão F")
    comum.add_argument("--levels", type=int, help="níveis L da DWT")
    comum.add_argument("--wavelet", choices=FAMILIAS_WAVELET)
    comum.add_argument("--variant", choices=VARIANTES)
    comum.add_argument("--epochs", type=int)
    comum.add_argument("--synthetic", action="store_true", help="usa a série sintética (duas senoides + ruído)")
    comum.add_argument("--header", action=argparse.BooleanOptionalAction, help="a primeira linha do CSV é cabeçalho (--no-header: é dado); sem a opção, detecta")
    comum.add_argument("--timestamp", action=argparse.BooleanOptionalAction, help="a primeira coluna é carimbo de tempo (--no-timestamp: é variável); sem a opção, detecta")
    comum.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="wdformer", description="Previsão de séries multivariadas com WDformer")
    comandos = parser.add_subparsers(dest="comando", required=True)
    comandos.add_parser("train", parents=[comum], help="treina e salva checkpoint, relatório e previsões de teste")
    avaliar = comandos.add_parser("eval", parents=[comum], help="avalia um checkpoint no segmento de teste")
    avaliar.add_argument("--checkpoint", help=f"padrão: <out>/{ARQUIVO_CHECKPOINT}")
    prever = comandos.add_parser("forecast", parents=[comum], help="prevê uma série nova com um checkpoint")
    prever.add_argument("--checkpoint", help=f"padrão: <out>/{ARQUIVO_CHECKPOINT}")
    ablar = comandos.add_parser("ablate", parents=[comum], help="compara as quatro variantes sob o mesmo protocolo")
    ablar.add_argument("--horizons", type=int, nargs="+", help="horizontes avaliados (padrão: train.horizons ou F)")
    teste = comandos.add_parser("selftest", parents=[comum], help="roda as suítes de autoverificação")
    teste.add_argument("--perturb-filter", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def _sobreposicoes(args: argparse.Namespace) -> dict[str, Any]:
    """Argumentos da CLI como chaves pontuadas; ausentes ficam de fora."""
    return {
        "data.path": args.data,
        "data.synthetic": True if args.synthetic else None,
        "data.header": args.header,
        "data.timestamp": args.timestamp,
        "out_dir": args.out,
        "model.seed": args.seed,
        "train.seed": args.seed,
        "model.F": args.horizon,
        "model.L": args.levels,
        "model.wavelet_family": args.wavelet,
        "model.variant": args.variant,
        "train.epochs": args.epochs,
        "train.horizons": getattr(args, "horizons", None),
    }


def _carregar_dataset(cfg: CliConfig) -> TimeSeriesDataset:
    if cfg.data.synthetic:
        return synthetic_benchmark(seed=cfg.model.seed)
    return load_csv(cfg.data.path, cfg.data)  # type: ignore[arg-type]


def _caminho_checkpoint(args: argparse.Namespace, cfg: CliConfig) -> str:
    return args.checkpoint or str(Path(cfg.out_dir) / ARQUIVO_CHECKPOINT)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = carregar_configuracao(args.config, _sobreposicoes(args))
    dataset = _carregar_dataset(cfg)
    params, relatorio, dados = train(cfg.model, cfg.train, dataset)
    cfg_modelo = replace(cfg.model, N=dataset.N)

    salvadores = Salvadores(cfg.out_dir)
    salvadores.salvar_checkpoint(params, cfg_modelo, dados.scaler, ARQUIVO_CHECKPOINT)
    salvadores.salvar_relatorio(relatorio, ARQUIVO_RELATORIO)
    salvadores.salvar_epocas(relatorio, ARQUIVO_EPOCAS)
    salvadores.salvar_previsoes(forecast_report(params, dados, cfg_modelo, original_units=True), dataset.variate_names, ARQUIVO_PREVISOES)
    print(f"test_mse = {relatorio.test_mse!r}\ntest_mae = {relatorio.test_mae!r}")
    print(f"baseline_mse = {relatorio.baseline_mse!r}\nbaseline_mae = {relatorio.baseline_mae!r}")
    return SAIDA_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = carregar_configuracao(args.config, _sobreposicoes(args))
    params, cfg_modelo, scaler = carregar_checkpoint(_caminho_checkpoint(args, cfg))
    dataset = _carregar_dataset(cfg)
    dados = preparar_dados(dataset, cfg_modelo, scaler)
    mse, mae = evaluate(params, dados, cfg_modelo, cfg.train.metrics_original_units)
    baseline_mse, baseline_mae = metricas_ingenuas(dados, cfg_modelo, cfg.train.metrics_original_units)
    metricas = {"variant": cfg_modelo.variant, "horizon": cfg_modelo.F, "test_mse": mse, "test_mae": mae, "baseline_mse": baseline_mse, "baseline_mae": baseline_mae}

    salvadores = Salvadores(cfg.out_dir)
    salvadores.salvar_metricas(metricas, ARQUIVO_AVALIACAO)
    salvadores.salvar_previsoes(forecast_report(params, dados, cfg_modelo, original_units=True), dataset.variate_names, ARQUIVO_PREVISOES)
    print("\n".join(f"{chave} = {valor!r}" for chave, valor in metricas.items()))
    return SAIDA_OK


def cmd_forecast(args: argparse.Namespace) -> int:
    cfg = carregar_configuracao(args.config, _sobreposicoes(args) | {"model.F": None})
    params, cfg_modelo, scaler = carregar_checkpoint(_caminho_checkpoint(args, cfg))
    if scaler is None:
        raise ErroDados("checkpoint sem escalador não serve para previsão")
    dataset = _carregar_dataset(cfg)
    previsoes, verdades = prever_serie(params, cfg_modelo, scaler, dataset.values, args.horizon)
    salvadores = Salvadores(cfg.out_dir)
    if verdades is None:
        salvadores.salvar_previsoes(previsoes, dataset.variate_names, ARQUIVO_PREVISOES)
    else:
        salvadores.salvar_previsoes(
            ForecastReport(horizon=previsoes.shape[-1], mse=float("nan"), mae=float("nan"), predictions=previsoes, truths=verdades),
            dataset.variate_names,
            ARQUIVO_PREVISOES,
        )
    return SAIDA_OK


def _registrar_referencia(horizontes: list[int]) -> None:
    """Valores publicados de ablação como alvo direcional (não reproduzíveis em bancada)."""
    for base, por_horizonte in REFERENCIA_ABLACAO.items():
        for horizonte in horizontes:
            if horizonte in por_horizonte:
                valores = ", ".join(f"{variante}={mse:.3f}/{mae:.3f}" for variante, (mse, mae) in por_horizonte[horizonte].items())
                logger.info(f"Referência {base} F={horizonte} (MSE/MAE): {valores}")


def cmd_ablate(args: argparse.Namespace) -> int:
    cfg = carregar_configuracao(args.config, _sobreposicoes(args))
    dataset = _carregar_dataset(cfg)
    relatorios = run_ablation(dataset, cfg.model, cfg.train)
    tabela = tabela_ablacao(relatorios)

    salvadores = Salvadores(cfg.out_dir)
    salvadores.salvar_tabela_ablacao(tabela, cfg.train.seed, ARQUIVO_ABLACAO)
    for relatorio in relatorios:
        salvadores.salvar_relatorio(relatorio, f"relatorio_{relatorio.variant}_F{relatorio.horizon}.txt")
    _registrar_referencia(sorted(set(tabela["horizon"])))
    print(tabela.to_string(index=False))
    return SAIDA_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    resultados = executar_autoteste(args.perturb_filter)
    for resultado in resultados:
        situacao = "ok" if resultado.aprovada else f"FALHOU ({resultado.detalhe})"
        print(f"{resultado.suite}: {situacao}")
    verificar(resultados)
    return SAIDA_OK


COMANDOS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "forecast": cmd_forecast,
    "ablate": cmd_ablate,
    "selftest": cmd_selftest,
}


def _linha_erro(codigo: int, tipo: str, motivo: str) -> str:
    return f"erro codigo={codigo} tipo={tipo} motivo={' '.join(motivo.split())}"


def main(argv: list[str] | None = None) -> int:
    args = construir_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    try:
        return COMANDOS[args.comando](args)
    except ErroWDformer as erro:
        print(_linha_erro(erro.codigo, erro.tipo, str(erro)), file=sys.stderr)
        return erro.codigo
    except (ErroDimensao, ErroComprimento) as erro:
        print(_linha_erro(SAIDA_CONFIGURACAO, "configuracao", str(erro)), file=sys.stderr)
        return SAIDA_CONFIGURACAO


if __name__ == "__main__":
    sys.exit(main())
