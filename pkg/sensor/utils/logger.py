import os
import sys
import logging
import inspect
from logging.handlers import TimedRotatingFileHandler


class Logger:
    """
    Logger Utility Class

    Static logging facade used across the sensor. Every message is prefixed with the calling
    'Class.method' (or 'module.function'). Log files rotate daily; diagnostics are mirrored to
    stderr so stdout only ever carries machine-readable output.
    """

    _handlers = []

    @staticmethod
    def configure(log_level, filename_prefix, output_dir="../data/logs", days_to_keep=10, console=True):
        """
        Configure the root logger for the application. Uses TimedRotatingFileHandler
        to rotate logs daily and delete old logs periodically.

        Args:
            log_level (int): The logging level (1=ERROR, 2=WARNING, 3=INFO, 4=DEBUG).
            filename_prefix (str): The prefix for the log file name.
            output_dir (str | None): The directory to store log files. None disables the file handler.
            days_to_keep (int): The number of days to keep log files. Older files will be deleted.
            console (bool): Mirror log records to stderr.
        """
        logger = logging.getLogger()

        # Calling configure twice (tests, restarts) must not duplicate output
        for handler in Logger._handlers:
            logger.removeHandler(handler)
            handler.close()
        Logger._handlers = []

        level_mapping = {
            1: logging.ERROR,
            2: logging.WARNING,
            3: logging.INFO,
            4: logging.DEBUG,  # Enables all logging levels
        }
        numeric_level = level_mapping.get(log_level, logging.DEBUG)
        formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

        if output_dir is not None:
            if not os.path.exists(output_dir):
                os.makedirs(output_dir)

            log_file = f"{output_dir}/{filename_prefix}.log"
            handler = TimedRotatingFileHandler(log_file, when='D', interval=1, backupCount=days_to_keep)
            handler.suffix = "%Y-%m-%d"
            handler.setFormatter(formatter)
            Logger._handlers.append(handler)

        if console:
            stream = logging.StreamHandler(sys.stderr)
            stream.setFormatter(formatter)
            Logger._handlers.append(stream)

        logger.setLevel(numeric_level)
        for handler in Logger._handlers:
            logger.addHandler(handler)

        command = " ".join(sys.argv)
        logger.info("Command executed:\n# %s\n", command)

    @staticmethod
    def get_caller_info():
        """
        Retrieve the name of the calling class and method/function.

        Returns:
            str: A string in the format 'ClassName.method_name' or 'module_name.function_name'.
        """
        stack = inspect.stack()
        for frame_info in stack[2:]:
            frame = frame_info.frame
            code = frame.f_code
            if "self" in frame.f_locals:
                class_name = frame.f_locals["self"].__class__.__name__
                method_name = code.co_name
                return f"{class_name}.{method_name}"

            module_name = frame.f_globals["__name__"]
            function_name = code.co_name
            return f"{module_name}.{function_name}"
        return "Unknown"

    @staticmethod
    def log(log_func, caller_info, message):
        log_func("%s:%s", caller_info, message)

    @staticmethod
    def info(message):
        Logger.log(logging.info, Logger.get_caller_info(), message)

    @staticmethod
    def warning(message):
        Logger.log(logging.warning, Logger.get_caller_info(), message)

    @staticmethod
    def error(message):
        Logger.log(logging.error, Logger.get_caller_info(), message)

    @staticmethod
    def exception(message):
        Logger.log(logging.exception, Logger.get_caller_info(), message)

    @staticmethod
    def debug(message):
        Logger.log(logging.debug, Logger.get_caller_info(), message)
