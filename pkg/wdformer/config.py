import os

# Constantes de configuração
PASTA_SAIDA_PADRAO: str = 'saida_wdformer'
MODO_DEPURACAO: bool = os.environ.get('WDF_DEBUG', '') not in ('', '0')
MAX_THREADS_ABLACAO: int = 4

# Modelo
FAMILIAS_WAVELET: tuple[str, ...] = ('haar', 'db2')
VARIANTES: tuple[str, ...] = ('full', 'no_wave', 'no_diff', 'neither')
EPS_RMS_NORM: float = 1e-5
EPS_LAYER_NORM: float = 1e-5
EPS_NORMALIZACAO_INSTANCIA: float = 1e-5
DESVIO_LAMBDA: float = 0.1

# Treino
LIMITE_DIVERGENCIA: float = 1e6
RAZOES_DIVISAO: tuple[float, float, float] = (0.7, 0.1, 0.2)

# Códigos de saída da CLI
SAIDA_OK: int = 0
SAIDA_CONFIGURACAO: int = 1
SAIDA_DADOS: int = 2
SAIDA_NUMERICO: int = 3
SAIDA_AUTOTESTE: int = 4

# Arquivos de saída
ARQUIVO_CHECKPOINT: str = 'checkpoint.arrow'
ARQUIVO_RELATORIO: str = 'relatorio.txt'
ARQUIVO_EPOCAS: str = 'epocas.csv'
ARQUIVO_PREVISOES: str = 'previsoes.csv'
ARQUIVO_ABLACAO: str = 'ablacao.csv'
ARQUIVO_AVALIACAO: str = 'avaliacao.txt'
FORMATO_CHECKPOINT: str = 'wdformer-checkpoint'
VERSAO_CHECKPOINT: int = 1

# Valores de referência publicados (ablação, ECL e Traffic). Não reproduzíveis
# em escala de bancada; servem apenas de comparação direcional.
REFERENCIA_ABLACAO: dict[str, dict[int, dict[str, tuple[float, float]]]] = {
    'ECL': {
        96: {'neither': (0.148, 0.240), 'no_diff': (0.146, 0.239), 'no_wave': (0.145, 0.237), 'full': (0.144, 0.237)},
        192: {'neither': (0.162, 0.253), 'no_diff': (0.163, 0.255), 'no_wave': (0.161, 0.253), 'full': (0.161, 0.253)},
        336: {'neither': (0.178, 0.269), 'no_diff': (0.174, 0.268), 'no_wave': (0.173, 0.267), 'full': (0.173, 0.267)},
        720: {'neither': (0.225, 0.317), 'no_diff': (0.207, 0.298), 'no_wave': (0.205, 0.295), 'full': (0.205, 0.296)},
    },
    'Traffic': {
        96: {'neither': (0.395, 0.268), 'no_diff': (0.394, 0.265), 'no_wave': (0.392, 0.268), 'full': (0.391, 0.265)},
        192: {'neither': (0.417, 0.276), 'no_diff': (0.407, 0.272), 'no_wave': (0.399, 0.271), 'full': (0.403, 0.271)},
        336: {'neither': (0.433, 0.283), 'no_diff': (0.416, 0.277), 'no_wave': (0.450, 0.293), 'full': (0.423, 0.280)},
        720: {'neither': (0.467, 0.302), 'no_diff': (0.450, 0.293), 'no_wave': (0.457, 0.301), 'full': (0.456, 0.298)},
    },
}
