"""Testes do embedding wavelet, da atenção diferencial e do encoder completo."""

import logging
import math
from dataclasses import replace

import numpy as np
import pytest

from wdformer.erros import ErroConfiguracao
from wdformer.modelo import (
    ContadorAtencao,
    _sintetizar,
    compute_lambda,
    diff_attention_head,
    encoder_layer_forward,
    forward,
    forward_ablated,
    inicializar_parametros,
    lambda_init_schedule,
    larguras_embedding,
    mapear_parametros,
    multi_head_attention,
    multi_head_diff_attention,
    named_parameters,
    parameters_to_vector,
    wavelet_embed,
)
from wdformer.numerics import AutodiffTape, TensorNode, backward, grad_check, mse_loss
from wdformer.tipos import ModelConfig
from wdformer.wavelet import analysis_matrix, get_filter, idwt_multilevel, split_wave


def _softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _ramos(X, p, cabeca):
    d_h = p.d_h
    q, k, v = X @ p.Wq.values, X @ p.Wk.values, X @ p.Wv.values
    r1 = slice(2 * cabeca * d_h, (2 * cabeca + 1) * d_h)
    r2 = slice((2 * cabeca + 1) * d_h, (2 * cabeca + 2) * d_h)
    return q[:, r1], k[:, r1], q[:, r2], k[:, r2], v[:, 2 * cabeca * d_h : 2 * (cabeca + 1) * d_h]


@pytest.fixture
def atencao(cfg_brinquedo):
    cfg = replace(cfg_brinquedo, N=5)
    return cfg, inicializar_parametros(cfg).layers[0].attention, np.random.default_rng(11).standard_normal((5, cfg.d))


class TestLambda:
    def test_primeiras_camadas(self):
        assert lambda_init_schedule(1) == pytest.approx(0.2, abs=1e-15)
        assert lambda_init_schedule(2) == pytest.approx(0.7 - 0.5 * math.exp(-0.3), abs=1e-15)
        assert lambda_init_schedule(2) == pytest.approx(0.32959, abs=1e-5)

    def test_crescente_e_limitada(self):
        valores = [lambda_init_schedule(l) for l in range(1, 30)]
        assert all(a < b for a, b in zip(valores, valores[1:]))
        assert max(valores) < 0.7

    def test_camada_zero(self):
        with pytest.raises(ValueError):
            lambda_init_schedule(0)

    def test_lambda_com_vetores_nulos_e_lambda_init(self, atencao):
        _, p, _ = atencao
        zeros = TensorNode(np.zeros_like(p.lambda_q1.values))
        p = replace(p, lambda_q1=zeros, lambda_k1=zeros, lambda_q2=zeros, lambda_k2=zeros)
        np.testing.assert_allclose(compute_lambda(p).values, p.lambda_init, atol=1e-15)

    def test_lambda_init_por_camada(self, cfg_brinquedo):
        camadas = inicializar_parametros(replace(cfg_brinquedo, e_layers=3)).layers
        assert [camada.attention.lambda_init for camada in camadas] == [lambda_init_schedule(l) for l in (1, 2, 3)]


class TestAtencaoDiferencial:
    def test_confere_com_laco_explicito(self, atencao):
        _, p, X = atencao
        lam = compute_lambda(p).values
        for cabeca in range(p.h):
            q1, k1, q2, k2, v = _ramos(X, p, cabeca)
            esperado = np.zeros((X.shape[0], v.shape[1]))
            for i in range(X.shape[0]):
                s1 = np.array([q1[i] @ k1[j] for j in range(X.shape[0])]) / math.sqrt(p.d_h)
                s2 = np.array([q2[i] @ k2[j] for j in range(X.shape[0])]) / math.sqrt(p.d_h)
                pesos = _softmax(s1) - lam[cabeca] * _softmax(s2)
                for j in range(X.shape[0]):
                    esperado[i] += pesos[j] * v[j]
            np.testing.assert_allclose(diff_attention_head(X, p, cabeca).values, esperado, atol=1e-12)

    def test_lambda_zero_vira_atencao_padrao(self, atencao):
        _, p, X = atencao
        zeros = TensorNode(np.zeros_like(p.lambda_q1.values))
        p = replace(p, lambda_q1=zeros, lambda_k1=zeros, lambda_q2=zeros, lambda_k2=zeros, lambda_init=0.0)
        q1, k1, _, _, v = _ramos(X, p, 0)
        padrao = _softmax(q1 @ k1.T / math.sqrt(p.d_h)) @ v
        np.testing.assert_allclose(diff_attention_head(X, p, 0).values, padrao, atol=1e-12)

    def test_ramos_iguais_escalam_por_um_menos_lambda(self, atencao):
        _, p, X = atencao
        d_h = p.d_h
        Wq, Wk = p.Wq.values.copy(), p.Wk.values.copy()
        Wq[:, d_h : 2 * d_h] = Wq[:, :d_h]
        Wk[:, d_h : 2 * d_h] = Wk[:, :d_h]
        p = replace(p, Wq=TensorNode(Wq), Wk=TensorNode(Wk))
        lam = float(compute_lambda(p).values[0])
        q1, k1, _, _, v = _ramos(X, p, 0)
        padrao = _softmax(q1 @ k1.T / math.sqrt(d_h)) @ v
        np.testing.assert_allclose(diff_attention_head(X, p, 0).values, (1.0 - lam) * padrao, atol=1e-10)

    def test_multi_cabeca_confere_com_composicao_manual(self, atencao):
        _, p, X = atencao
        partes = []
        for cabeca in range(p.h):
            o = diff_attention_head(X, p, cabeca).values
            rms = np.sqrt(np.mean(o**2, axis=-1, keepdims=True) + 1e-5)
            partes.append(o / rms * p.rms_gain.values[cabeca] * (1.0 - p.lambda_init))
        esperado = np.concatenate(partes, axis=-1) @ p.Wo.weight.values + p.Wo.bias.values
        saida = multi_head_diff_attention(X, p).values
        assert saida.shape == X.shape
        np.testing.assert_allclose(saida, esperado, atol=1e-12)

    def test_lote_igual_a_amostras_isoladas(self, atencao):
        _, p, X = atencao
        lote = np.stack([X, 2.0 * X, -X])
        saida = multi_head_diff_attention(lote, p).values
        for i in range(3):
            np.testing.assert_allclose(saida[i], multi_head_diff_attention(lote[i], p).values, atol=1e-12)

    def test_atencao_padrao_usa_so_o_primeiro_ramo(self, atencao):
        _, p, X = atencao
        partes = []
        for cabeca in range(p.h):
            q1, k1, _, _, v = _ramos(X, p, cabeca)
            partes.append(_softmax(q1 @ k1.T / math.sqrt(p.d_h)) @ v)
        esperado = np.concatenate(partes, axis=-1) @ p.Wo.weight.values + p.Wo.bias.values
        np.testing.assert_allclose(multi_head_attention(X, p).values, esperado, atol=1e-12)

    def test_custo_independe_de_K_e_cresce_com_N_ao_quadrado(self):
        def contar(K: int, N: int) -> int:
            cfg = ModelConfig(K=K, F=8, N=N, L=1, d=8, h=2, e_layers=1, d_ff=8, dropout=0.0)
            contador = ContadorAtencao()
            forward(np.random.default_rng(0).standard_normal((N, K)), inicializar_parametros(cfg), cfg, contador=contador)
            return contador.multiplicacoes_score

        assert contar(96, 3) == contar(384, 3)
        assert contar(96, 6) == 4 * contar(96, 3)


class TestEmbedding:
    def test_larguras(self):
        assert larguras_embedding(8, 1) == [4, 4]
        assert larguras_embedding(10, 2) == [3, 3, 4]
        assert sum(larguras_embedding(64, 3)) == 64

    def test_forma_e_um_mapa_por_conjunto(self, cfg_brinquedo):
        cfg = replace(cfg_brinquedo, K=16, L=2, d=8)
        params = inicializar_parametros(cfg)
        assert len(params.embedding.maps) == 3
        assert [mapa.weight.shape for mapa in params.embedding.maps] == [(4, 2), (4, 2), (8, 4)]
        tokens = wavelet_embed(np.random.default_rng(1).standard_normal((3, 16)), params.embedding, cfg)
        assert tokens.shape == (3, 8)

    def test_larguras_com_resto_no_ultimo_mapa(self):
        assert larguras_embedding(130, 3) == [32, 32, 32, 34]
        cfg = ModelConfig(K=16, F=16, N=2, L=3, d=130, h=2, e_layers=1, d_ff=8)
        params = inicializar_parametros(cfg)
        assert [mapa.weight.shape for mapa in params.embedding.maps] == [(2, 32), (2, 32), (4, 32), (8, 34)]
        tokens = wavelet_embed(np.random.default_rng(2).standard_normal((2, 16)), params.embedding, cfg)
        assert tokens.shape == (2, 130)


def _layer_norm(x, eps=1e-5):
    return (x - x.mean(axis=-1, keepdims=True)) / np.sqrt(x.var(axis=-1, keepdims=True) + eps)


class TestCamadaDoEncoder:
    @pytest.mark.parametrize("diferencial", [True, False])
    def test_pesos_nulos_devolvem_norma_da_norma(self, cfg_brinquedo, diferencial):
        params = inicializar_parametros(cfg_brinquedo)
        zerados = mapear_parametros(params, lambda nome, no: no if ".norm" in nome else TensorNode(np.zeros(no.shape)))
        x = np.random.default_rng(12).standard_normal((3, cfg_brinquedo.d)) * 3.0 + 1.0
        saida = encoder_layer_forward(TensorNode(x), zerados.layers[0], cfg_brinquedo, diferencial=diferencial).values
        np.testing.assert_allclose(saida, _layer_norm(_layer_norm(x)), atol=1e-12)

    @pytest.mark.parametrize("diferencial", [True, False])
    def test_gradientes_da_camada(self, cfg_brinquedo, diferencial):
        camada = inicializar_parametros(cfg_brinquedo).layers[0]
        rng = np.random.default_rng(13)
        x = rng.standard_normal((3, cfg_brinquedo.d))
        alvo = rng.standard_normal((3, cfg_brinquedo.d))

        def pela_entrada(entrada):
            return mse_loss(encoder_layer_forward(entrada, camada, cfg_brinquedo, diferencial=diferencial), alvo)

        def por_Wq(Wq):
            trocada = replace(camada, attention=replace(camada.attention, Wq=Wq))
            return mse_loss(encoder_layer_forward(TensorNode(x), trocada, cfg_brinquedo, diferencial=diferencial), alvo)

        def por_ffn(peso):
            trocada = replace(camada, ffn_in=replace(camada.ffn_in, weight=peso))
            return mse_loss(encoder_layer_forward(TensorNode(x), trocada, cfg_brinquedo, diferencial=diferencial), alvo)

        assert grad_check(pela_entrada, x) < 1e-5
        assert grad_check(por_Wq, camada.attention.Wq.values) < 1e-5
        assert grad_check(por_ffn, camada.ffn_in.weight.values) < 1e-5


class TestGradienteDeLambda:
    def _gradientes(self, cfg, variante):
        params = inicializar_parametros(cfg)
        rng = np.random.default_rng(14)
        X, Y = rng.standard_normal((4, 3, 8)), rng.standard_normal((4, 3, 8))
        with AutodiffTape():
            backward(mse_loss(forward_ablated(X, params, cfg, variante), Y))
        return {nome: no.grad for nome, no in named_parameters(params)}

    def test_no_diff_zera_o_gradiente_de_lambda(self, cfg_brinquedo):
        gradientes = self._gradientes(replace(cfg_brinquedo, variant="no_diff"), "no_diff")
        nomes_lambda = [nome for nome in gradientes if ".lambda_" in nome]
        assert len(nomes_lambda) == 4 * cfg_brinquedo.e_layers
        for nome in nomes_lambda:
            assert gradientes[nome] is None or np.all(gradientes[nome] == 0.0), nome
        assert gradientes["layers.0.attention.Wq"] is not None
        assert np.any(gradientes["layers.0.attention.Wq"] != 0.0)

    def test_full_propaga_para_lambda(self, cfg_brinquedo):
        gradientes = self._gradientes(cfg_brinquedo, "full")
        assert np.any(gradientes["layers.0.attention.lambda_q1"] != 0.0)


class TestForward:
    def test_formas(self, cfg_brinquedo):
        params = inicializar_parametros(cfg_brinquedo)
        rng = np.random.default_rng(2)
        assert forward(rng.standard_normal((3, 8)), params, cfg_brinquedo).shape == (3, 8)
        assert forward(rng.standard_normal((5, 3, 8)), params, cfg_brinquedo).shape == (5, 3, 8)

    def test_deterministico_em_avaliacao(self, cfg_brinquedo):
        cfg = replace(cfg_brinquedo, dropout=0.3)
        params = inicializar_parametros(cfg)
        x = np.random.default_rng(3).standard_normal((3, 8))
        np.testing.assert_array_equal(forward(x, params, cfg).values, forward(x, params, cfg).values)

    def test_mesma_semente_mesmos_parametros(self, cfg_brinquedo):
        np.testing.assert_array_equal(
            parameters_to_vector(inicializar_parametros(cfg_brinquedo)), parameters_to_vector(inicializar_parametros(cfg_brinquedo))
        )
        outra = parameters_to_vector(inicializar_parametros(replace(cfg_brinquedo, seed=8)))
        assert not np.array_equal(parameters_to_vector(inicializar_parametros(cfg_brinquedo)), outra)

    def test_nomes_estaveis(self, cfg_brinquedo):
        nomes = [nome for nome, _ in named_parameters(inicializar_parametros(cfg_brinquedo))]
        assert "embedding.maps.0.weight" in nomes
        assert "layers.0.attention.Wq" in nomes
        assert "head.bias" in nomes
        assert len(nomes) == len(set(nomes))

    def test_variante_full_igual_ao_forward(self, cfg_brinquedo):
        params = inicializar_parametros(cfg_brinquedo)
        x = np.random.default_rng(4).standard_normal((3, 8))
        np.testing.assert_array_equal(forward_ablated(x, params, cfg_brinquedo, "full").values, forward(x, params, cfg_brinquedo).values)

    @pytest.mark.parametrize("variante", ["full", "no_wave", "no_diff", "neither"])
    def test_todas_as_variantes(self, cfg_brinquedo, variante):
        cfg = replace(cfg_brinquedo, variant=variante)
        saida = forward_ablated(np.random.default_rng(5).standard_normal((3, 8)), inicializar_parametros(cfg), cfg, variante)
        assert saida.shape == (3, 8)
        assert np.all(np.isfinite(saida.values))

    def test_parametros_de_outra_variante(self, cfg_brinquedo):
        params = inicializar_parametros(cfg_brinquedo)
        with pytest.raises(ErroConfiguracao):
            forward_ablated(np.zeros((3, 8)), params, cfg_brinquedo, "no_wave")

    def test_variante_desconhecida(self, cfg_brinquedo):
        with pytest.raises(ErroConfiguracao):
            forward_ablated(np.zeros((3, 8)), inicializar_parametros(cfg_brinquedo), cfg_brinquedo, "wave_only")

    def test_janela_de_comprimento_errado(self, cfg_brinquedo):
        with pytest.raises(ErroConfiguracao):
            forward(np.zeros((3, 9)), inicializar_parametros(cfg_brinquedo), cfg_brinquedo)

    def test_cabeca_que_devolve_o_futuro(self, cfg_brinquedo):
        cfg = replace(cfg_brinquedo, instance_norm=False)
        futuro = np.random.default_rng(6).standard_normal(8)
        M = analysis_matrix(8, 1, get_filter("haar"))
        params = inicializar_parametros(cfg)
        params = replace(params, head=replace(params.head, weight=TensorNode(np.zeros((8, 8))), bias=TensorNode(M @ futuro)))
        saida = forward(np.random.default_rng(7).standard_normal((3, 8)), params, cfg).values
        np.testing.assert_allclose(saida, np.tile(futuro, (3, 1)), atol=1e-12)

    def test_normalizacao_de_instancia_restaura_nivel(self, cfg_brinquedo):
        params = inicializar_parametros(cfg_brinquedo)
        x = np.random.default_rng(8).standard_normal((3, 8))
        base = forward(x, params, cfg_brinquedo).values
        np.testing.assert_allclose(forward(x + 100.0, params, cfg_brinquedo).values, base + 100.0, atol=1e-8)

    def test_preenchimento_quando_nao_divisivel(self, cfg_brinquedo, caplog):
        cfg = replace(cfg_brinquedo, K=10, F=6, L=2)
        with caplog.at_level(logging.WARNING):
            params = inicializar_parametros(cfg)
        assert "replicação da borda" in caplog.text
        assert params.head.weight.shape == (cfg.d, 8)
        assert forward(np.random.default_rng(9).standard_normal((3, 10)), params, cfg).shape == (3, 6)

    @pytest.mark.parametrize(("familia", "L"), [("haar", 1), ("haar", 3), ("db2", 2)])
    def test_sintese_na_fita_igual_a_idwt_multinivel(self, familia, L):
        cfg = ModelConfig(K=32, F=32, L=L, wavelet_family=familia)
        coeficientes = np.random.default_rng(15).standard_normal((3, 32))
        saida = _sintetizar(TensorNode(coeficientes), cfg).values
        esperado = idwt_multilevel(split_wave(coeficientes, 32, L), get_filter(familia))
        np.testing.assert_allclose(saida, esperado, atol=1e-12)

    def test_sem_preenchimento_falha(self, cfg_brinquedo):
        with pytest.raises(ErroConfiguracao, match="não é divisível"):
            inicializar_parametros(replace(cfg_brinquedo, K=10, L=2, padding=False))

    def test_d_nao_divisivel_por_h(self, cfg_brinquedo):
        with pytest.raises(ErroConfiguracao):
            inicializar_parametros(replace(cfg_brinquedo, d=9))

    def test_mapear_parametros_preserva_estrutura(self, cfg_brinquedo):
        params = inicializar_parametros(cfg_brinquedo)
        dobrados = mapear_parametros(params, lambda _, no: TensorNode(2.0 * no.values))
        np.testing.assert_array_equal(parameters_to_vector(dobrados), 2.0 * parameters_to_vector(params))
