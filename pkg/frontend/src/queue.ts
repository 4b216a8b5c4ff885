/** A single serial queue so concurrent async events never interleave UI updates. */

export class EventQueue {
  private tail: Promise<void> = Promise.resolve();
  private depth = 0;

  /** Run `task` after every previously pushed task has settled. */
  push(task: () => void | Promise<void>): Promise<void> {
    this.depth += 1;
    const run = async () => {
      try {
        await task();
      } finally {
        this.depth -= 1;
      }
    };
    // A failing task must not wedge the queue; later tasks still run.
    this.tail = this.tail.then(run, run);
    return this.tail;
  }

  /** Number of tasks pushed but not yet finished. */
  get pending(): number {
    return this.depth;
  }

  /** Resolves once everything pushed so far has finished. */
  idle(): Promise<void> {
    return this.tail.then(
      () => undefined,
      () => undefined,
    );
  }
}
