class BKFourierError(RuntimeError):
    pass


class FieldError(BKFourierError, ValueError):
    pass


class SizeLimitError(BKFourierError):
    pass


class ActionError(BKFourierError):
    pass


class KernelError(BKFourierError):
    pass


class SectorError(BKFourierError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ConfigError(BKFourierError, ValueError):
    pass


class ReportError(BKFourierError):
    pass
