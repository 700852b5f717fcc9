"""Testes de leitura, divisão cronológica, janelas, escala e métricas."""

import numpy as np
import pytest

from wdformer.dados import (
    chronological_split,
    fit_scaler,
    load_csv,
    mae,
    make_windows,
    mse,
    pad_to_divisible,
    stack_windows,
    synthetic_benchmark,
    truncar,
)
from wdformer.erros import ErroConfiguracao, ErroDados, ErroDimensao
from wdformer.tipos import DataConfig, ModelConfig, TimeSeriesDataset
from wdformer.treino import preparar_dados


def _serie(T: int, N: int = 2) -> TimeSeriesDataset:
    valores = np.arange(T * N, dtype=float).reshape(T, N)
    return TimeSeriesDataset(name="teste", values=valores, variate_names=[f"v{j}" for j in range(N)])


class TestDivisao:
    def test_tamanhos_de_referencia(self):
        treino, validacao, teste = chronological_split(_serie(25635, 1))
        assert (treino.T, validacao.T, teste.T) == (17944, 2563, 5128)

    def test_contiguos_e_em_ordem(self):
        serie = _serie(100)
        treino, validacao, teste = chronological_split(serie)
        assert (treino.T, validacao.T, teste.T) == (70, 10, 20)
        np.testing.assert_array_equal(np.concatenate([treino.values, validacao.values, teste.values]), serie.values)

    def test_segmento_curto_demais(self):
        with pytest.raises(ErroConfiguracao, match="val"):
            chronological_split(_serie(100), K=8, F=8)

    def test_razoes_invalidas(self):
        with pytest.raises(ErroConfiguracao):
            chronological_split(_serie(100), razoes=(0.7, -0.1, 0.4))


class TestJanelas:
    def test_contagem(self):
        assert len(make_windows(_serie(200), 96, 96)) == 9
        assert len(make_windows(_serie(191), 96, 96)) == 0

    def test_alvo_segue_a_retrospeccao(self):
        serie = _serie(30)
        janelas = make_windows(serie, 8, 4)
        assert len(janelas) == 30 - 8 - 4 + 1
        janela = janelas[5]
        assert janela.x.shape == (2, 8) and janela.y.shape == (2, 4)
        np.testing.assert_array_equal(janela.x, serie.values[5:13].T)
        np.testing.assert_array_equal(janela.y, serie.values[13:17].T)

    def test_stride(self):
        assert [janela.inicio for janela in make_windows(_serie(30), 8, 4, stride=5)] == [0, 5, 10, 15]

    def test_empilhar(self):
        X, Y = stack_windows(make_windows(_serie(30), 8, 4))
        assert X.shape == (19, 2, 8) and Y.shape == (19, 2, 4)

    def test_empilhar_vazio(self):
        with pytest.raises(ErroConfiguracao):
            stack_windows([])

    @pytest.mark.parametrize("T", [16, 17, 40, 97])
    @pytest.mark.parametrize(("K", "F"), [(8, 8), (4, 12), (1, 1), (16, 1)])
    def test_contagem_e_T_menos_K_menos_F_mais_1(self, T, K, F):
        janelas = make_windows(_serie(T), K, F)
        assert len(janelas) == max(0, T - K - F + 1)
        assert all(janela.inicio + K + F <= T for janela in janelas)

    def test_validacao_e_teste_nao_tocam_o_treino(self):
        serie = _serie(400, 1)
        dados = preparar_dados(serie, ModelConfig(K=8, F=8, N=1, L=1, d=8, h=2))
        fim_treino, fim_validacao = 280, 320

        def indices(janelas):
            X, Y = (dados.scaler.inverter_janela(parte) for parte in janelas)
            return np.rint(np.concatenate([X.ravel(), Y.ravel()]))

        assert indices(dados.treino).max() < fim_treino
        assert indices(dados.validacao).min() >= fim_treino
        assert indices(dados.validacao).max() < fim_validacao
        assert indices(dados.teste).min() >= fim_validacao


class TestEscalador:
    def test_ida_e_volta(self):
        valores = np.random.default_rng(0).standard_normal((50, 3)) * [1.0, 10.0, 1e-3] + [5.0, -2.0, 100.0]
        scaler = fit_scaler(valores)
        escalados = scaler.aplicar(valores)
        np.testing.assert_allclose(escalados.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(escalados.std(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(scaler.inverter(escalados), valores, atol=1e-12)

    def test_desvio_populacional(self):
        scaler = fit_scaler(np.array([[1.0], [3.0]]))
        np.testing.assert_array_equal(scaler.mean, [2.0])
        np.testing.assert_array_equal(scaler.std, [1.0])

    def test_janelas_com_variaveis_no_penultimo_eixo(self):
        scaler = fit_scaler(np.array([[1.0, 10.0], [3.0, 30.0]]))
        janela = np.array([[1.0, 3.0], [10.0, 30.0]])
        np.testing.assert_allclose(scaler.aplicar_janela(janela), [[-1.0, 1.0], [-1.0, 1.0]])
        np.testing.assert_allclose(scaler.inverter_janela(scaler.aplicar_janela(janela)), janela)

    def test_variancia_zero(self):
        serie = TimeSeriesDataset(name="x", values=np.array([[1.0, 2.0], [1.0, 3.0]]), variate_names=["fixa", "livre"])
        with pytest.raises(ErroDados, match="fixa"):
            fit_scaler(serie)

    def test_validacao_e_teste_usam_as_estatisticas_do_treino(self):
        serie = _serie(400, 2)
        dados = preparar_dados(serie, ModelConfig(K=8, F=8, N=2, L=1, d=8, h=2))
        treino, validacao, teste = chronological_split(serie)
        esperado = fit_scaler(treino)
        np.testing.assert_array_equal(dados.scaler.mean, esperado.mean)
        np.testing.assert_array_equal(dados.scaler.std, esperado.std)
        for segmento, janelas in ((validacao, dados.validacao), (teste, dados.teste)):
            X, Y = stack_windows(make_windows((segmento.values - esperado.mean) / esperado.std, 8, 8))
            np.testing.assert_allclose(janelas[0], X, atol=1e-12)
            np.testing.assert_allclose(janelas[1], Y, atol=1e-12)

    def test_ajustar_com_a_validacao_muda_as_estatisticas(self):
        treino, validacao, _ = chronological_split(_serie(400, 2))
        so_treino = fit_scaler(treino)
        com_validacao = fit_scaler(np.concatenate([treino.values, validacao.values]))
        assert not np.allclose(so_treino.mean, com_validacao.mean)
        assert not np.allclose(so_treino.std, com_validacao.std)


class TestMetricas:
    def test_valores(self):
        assert mse(np.array([1.0, 2.0]), np.array([1.0, 4.0])) == 2.0
        assert mae(np.array([1.0, 2.0]), np.array([1.0, 4.0])) == 1.0

    def test_formas_diferentes(self):
        with pytest.raises(ErroDimensao):
            mse(np.zeros((2, 3)), np.zeros((3, 2)))
        with pytest.raises(ErroDimensao):
            mae(np.zeros(3), np.zeros(4))

    @pytest.mark.parametrize("seed", range(3))
    def test_nao_negativas_e_invariantes_a_permutacao(self, seed):
        rng = np.random.default_rng(seed)
        pred, truth = rng.standard_normal((4, 3, 6)), rng.standard_normal((4, 3, 6))
        ordem = rng.permutation(pred.size)
        embaralhado_pred = pred.ravel()[ordem].reshape(pred.shape)
        embaralhado_truth = truth.ravel()[ordem].reshape(truth.shape)
        assert mse(pred, truth) >= 0.0 and mae(pred, truth) >= 0.0
        assert mse(embaralhado_pred, embaralhado_truth) == pytest.approx(mse(pred, truth), rel=1e-12)
        assert mae(embaralhado_pred, embaralhado_truth) == pytest.approx(mae(pred, truth), rel=1e-12)
        assert mse(pred, pred) == 0.0 and mae(pred, pred) == 0.0


class TestPreenchimento:
    def test_replica_a_borda(self):
        x = np.array([[1.0, 2.0, 3.0, 4.0, 5.0]])
        preenchido, info = pad_to_divisible(x, 2)
        np.testing.assert_array_equal(preenchido, [[1, 2, 3, 4, 5, 5, 5, 5]])
        np.testing.assert_array_equal(truncar(preenchido, info), x)

    def test_ja_divisivel(self):
        x = np.ones((2, 8))
        preenchido, info = pad_to_divisible(x, 3)
        assert preenchido.shape == (2, 8) and info.original_length == info.padded_length == 8


class TestLeituraCSV:
    def test_cabecalho_e_carimbo_de_tempo(self, csv_senoidal):
        serie = load_csv(csv_senoidal)
        assert serie.values.shape == (200, 2)
        assert serie.variate_names == ["a", "b"]
        assert serie.timestamps is not None and serie.timestamps[0] == "2024-01-01 0000"
        assert serie.name == "senoides"

    def test_sem_cabecalho(self, escrever_csv):
        serie = load_csv(escrever_csv("1.0,2.0\n3.0,4.0\n5.0,6.0\n"))
        assert serie.variate_names == ["var0", "var1"]
        assert serie.timestamps is None
        np.testing.assert_array_equal(serie.values, [[1, 2], [3, 4], [5, 6]])

    def test_ponto_e_virgula(self, escrever_csv):
        serie = load_csv(escrever_csv("x;y\n1.5;2\n3;4\n"))
        np.testing.assert_array_equal(serie.values, [[1.5, 2.0], [3.0, 4.0]])

    def test_arquivo_ausente(self, tmp_path):
        caminho = str(tmp_path / "nao_existe.csv")
        with pytest.raises(ErroDados, match="nao_existe.csv"):
            load_csv(caminho)

    def test_celula_nao_numerica_com_linha(self, escrever_csv):
        with pytest.raises(ErroDados, match=r"'abc'.*linha 3"):
            load_csv(escrever_csv("a,b\n1,2\n3,abc\n5,6\n"))

    def test_linha_irregular(self, escrever_csv):
        with pytest.raises(ErroDados):
            load_csv(escrever_csv("a,b,c\n1,2,3\n4,5\n7,8,9\n"))

    def test_linha_longa_demais(self, escrever_csv):
        with pytest.raises(ErroDados, match="irregulares"):
            load_csv(escrever_csv("a,b\n1,2\n3,4,5\n6,7\n"))

    def test_ausentes_descartados(self, escrever_csv):
        serie = load_csv(escrever_csv("a,b\n1,2\n3,NaN\n5,6\n,8\n9,10\n"))
        np.testing.assert_array_equal(serie.values, [[1, 2], [5, 6], [9, 10]])

    def test_ausentes_com_politica_fail(self, escrever_csv):
        caminho = escrever_csv("a,b\n1,2\n3,NaN\n5,6\n")
        with pytest.raises(ErroDados, match="linha 3"):
            load_csv(caminho, DataConfig(path=caminho, nan_policy="fail"))

    def test_opcoes_forcam_a_deteccao(self, escrever_csv):
        caminho = escrever_csv("10,20\n30,40\n")
        serie = load_csv(caminho, DataConfig(path=caminho, header=True))
        assert serie.variate_names == ["10", "20"]
        np.testing.assert_array_equal(serie.values, [[30, 40]])

    def test_arquivo_vazio(self, escrever_csv):
        with pytest.raises(ErroDados):
            load_csv(escrever_csv(""))

    def test_byte_invalido_depois_da_amostra_relido_como_latino(self, csv_com_byte_latino, caplog):
        caminho, posicao = csv_com_byte_latino(b"2024-01-01 caf\xe9,0.5,1.5\n")
        with caplog.at_level("WARNING"):
            serie = load_csv(caminho)
        assert serie.values.shape == (601, 2)
        assert serie.timestamps[-1] == "2024-01-01 café"
        np.testing.assert_array_equal(serie.values[-1], [0.5, 1.5])
        assert f"byte {posicao}" in caplog.text

    def test_byte_invalido_em_celula_numerica(self, csv_com_byte_latino):
        caminho, _ = csv_com_byte_latino(b"2024-01-02,1.0,\xe9\n")
        with pytest.raises(ErroDados, match="linha 602"):
            load_csv(caminho)


class TestSintetico:
    def test_forma_e_reprodutibilidade(self):
        a, b = synthetic_benchmark(T=500, N=4, seed=3), synthetic_benchmark(T=500, N=4, seed=3)
        assert a.values.shape == (500, 4)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, synthetic_benchmark(T=500, N=4, seed=4).values)
