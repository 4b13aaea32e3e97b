# dsre/gds_config.py

# Relações do corpus de fatos julgados por humanos (NA sempre no índice 0)
GDS_RELATIONS = [
    "NA",
    "perGraduatedInstitution",
    "perHasDegree",
    "perPlaceOfBirth",
    "perPlaceOfDeath",
]

MAX_SNIPPET_TOKENS = 500
DEFAULT_MAX_SNIPPETS = 10
DEFAULT_WINDOW = 500

# treino / dev / teste, sem par de entidades repetido entre eles
DEFAULT_RATIOS = (0.6, 0.1, 0.3)
SPLIT_NAMES = ("train", "dev", "test")

# unidade de contagem das proporções
SPLIT_UNITS = ("sentences", "pairs")

# fração do treino que vira dev na repartição 80/20
DEFAULT_DEV_FRACTION = 0.2
