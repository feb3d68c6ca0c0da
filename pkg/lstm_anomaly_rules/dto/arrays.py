from typing import Any, List

import numpy as np
from pydantic import BeforeValidator, PlainSerializer
from typing_extensions import Annotated


def readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def to_float_array(value: Any) -> np.ndarray:
    return readonly(np.array(value, dtype=np.float64))


def to_index_array(value: Any) -> np.ndarray:
    array = np.array(value)
    if array.size and not np.issubdtype(array.dtype, np.integer):
        if not np.all(np.equal(np.mod(array, 1), 0)):
            raise ValueError("index arrays must hold integers")
    return readonly(array.astype(np.int64).reshape(-1))


def to_list(array: np.ndarray) -> List[Any]:
    return array.tolist()


FloatArray = Annotated[
    np.ndarray, BeforeValidator(to_float_array), PlainSerializer(to_list, return_type=list)
]
IndexArray = Annotated[
    np.ndarray, BeforeValidator(to_index_array), PlainSerializer(to_list, return_type=list)
]
