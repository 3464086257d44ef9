import logging
import os
from abc import ABC, abstractmethod


class StorageBackend(ABC):
    @abstractmethod
    def save_file(self, file_ref: str, data: bytes) -> None:
        pass

    @abstractmethod
    def read_file(self, file_ref: str) -> bytes:
        pass

    @abstractmethod
    def exists(self, file_ref: str) -> bool:
        pass


class LocalStorageBackend(StorageBackend):
    def __init__(self, base_directory: str):
        self.base_directory = str(base_directory)
        os.makedirs(self.base_directory, exist_ok=True)

    def _full_path(self, file_ref: str) -> str:
        return os.path.join(self.base_directory, file_ref)

    def save_file(self, file_ref: str, data: bytes) -> None:
        full_path = self._full_path(file_ref)
        os.makedirs(os.path.dirname(full_path) or ".", exist_ok=True)
        try:
            with open(full_path, "wb") as f:
                f.write(data)
            logging.debug(f"File saved locally at {full_path}")
        except IOError as e:
            logging.error(f"Failed to save file locally: {e}")
            raise

    def read_file(self, file_ref: str) -> bytes:
        full_path = self._full_path(file_ref)
        try:
            with open(full_path, "rb") as f:
                data = f.read()
            logging.debug(f"File read locally from {full_path}")
            return data
        except IOError as e:
            logging.error(f"Failed to read file locally: {e}")
            raise

    def exists(self, file_ref: str) -> bool:
        return os.path.exists(self._full_path(file_ref))
