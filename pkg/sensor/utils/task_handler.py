from utils.logger import Logger
import asyncio
import heapq
import itertools
import time

logging = Logger()


class TaskHandler:
    @staticmethod
    async def stop_tasks(coroutine_task):
        """
        Stops specified asynchronous tasks if they are currently running.

        This function iterates through the given asyncio tasks. For each task that has not finished,
        it requests cancellation, then waits until every cancelled task has actually stopped.
        """
        cancel_tasks = []

        for task in coroutine_task:
            try:
                if not task.done():
                    task.cancel()
                    logging.debug(f"[{task.get_name()}]")
                    cancel_tasks.append(task)

            except Exception as e:
                logging.error(f"An error occurred whilst trying to stop: [{task.get_name()}]: {e}")

        if cancel_tasks:
            await asyncio.wait(cancel_tasks)

    @staticmethod
    def start_tasks(coroutines):
        """
        Starts each (name, coroutine) pair as a named asyncio task and returns the tasks.
        A coroutine that cannot be scheduled is closed and logged.
        """
        tasks = []
        for name, coroutine in coroutines:
            try:
                tasks.append(asyncio.create_task(coroutine, name=name))
            except Exception as e:
                coroutine.close()
                logging.error(f"An error occurred whilst trying to start: [{name}]: {e}")
        return tasks


class WallClock:
    """Real time, for live sources."""

    @staticmethod
    def now():
        return time.time()

    @staticmethod
    async def sleep(seconds):
        await asyncio.sleep(max(0.0, seconds))

    async def advance_to(self, timestamp):
        pass


class SimulatedClock:
    """
    Time taken from the frames being replayed. `sleep()` parks the caller until a frame with a
    timestamp at or past its deadline is ingested, so a recorded hour replays in milliseconds
    while timers fire in the same order they would have live.
    """

    def __init__(self, start=None):
        self.current = start
        self.sleepers = []
        self.sequence = itertools.count()

    def now(self):
        return self.current if self.current is not None else 0.0

    async def sleep(self, seconds):
        future = asyncio.get_running_loop().create_future()
        heapq.heappush(self.sleepers, (self.now() + max(0.0, seconds), next(self.sequence), future))
        await future

    async def advance_to(self, timestamp):
        if self.current is not None and timestamp <= self.current:
            return

        while self.sleepers and self.sleepers[0][0] <= timestamp:
            deadline, _, future = heapq.heappop(self.sleepers)
            self.current = deadline if self.current is None else max(self.current, deadline)
            if future.done():
                continue
            future.set_result(None)
            # let the woken task run up to its next await
            for _ in range(3):
                await asyncio.sleep(0)

        self.current = timestamp
