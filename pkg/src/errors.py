"""
Exception hierarchy untuk composition engine.
CLI memetakan kelas-kelas ini ke exit code.
"""

from typing import Optional


class CompositionEngineError(Exception):
    """Base class semua error engine"""

    exit_code = 1


class InputError(CompositionEngineError, ValueError):
    """Input tidak valid: file rusak, dimensi tidak cocok, config salah"""

    exit_code = 2


class ScalingError(InputError):
    """Kalibrasi skala tidak konsisten (beta <= 0 atau garis referensi sama)"""


class OracleTooLargeError(InputError):
    """Instance terlalu besar untuk brute force"""


class CapacityError(CompositionEngineError):
    """Patch lebih besar dari kapasitas detector setelah scaling"""

    exit_code = 4

    def __init__(self, patch_id: int, message: Optional[str] = None):
        self.patch_id = patch_id
        super().__init__(message or f"patch {patch_id} exceeds detector capacity")


class VerificationFailure(CompositionEngineError):
    """Verifikasi gagal: ada patch yang tidak muat di blank rectangle manapun"""

    exit_code = 4

    def __init__(self, patch_id: int):
        self.patch_id = patch_id
        super().__init__(f"patch {patch_id} fits in no blank rectangle")


class UnmappableBoxError(CompositionEngineError):
    """Box detector tidak berada di region placement manapun"""


class DetectorProtocolError(CompositionEngineError):
    """Child process detector melanggar protokol, timeout, atau mati"""

    exit_code = 3
