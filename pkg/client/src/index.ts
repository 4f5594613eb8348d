/**
 * Client for the dinersim environment server.
 *
 * Spawns `python3 -m dinersim serve` as a child process and exposes the
 * usual episodic interface (reset -> state, step -> state/reward/done/info)
 * over its line-delimited JSON protocol. One client owns one child process;
 * run several clients for parallel environments.
 */

import { spawn, ChildProcess } from 'node:child_process';
import { createInterface } from 'node:readline';

/** Action count the server must report during the handshake. */
export const N_ACTIONS = 57;
/** State vector length the server must report during the handshake. */
export const STATE_DIM = 40;

export interface DiscreteSpace {
  kind: 'discrete';
  n: number;
}

export interface BoxSpace {
  kind: 'box';
  dim: number;
}

/** Per-step diagnostics forwarded verbatim from the server. */
export interface StepInfo {
  lives: number;
  illegal: boolean;
  events: string[];
  step: number;
  departures: number;
}

export interface StepResult {
  state: number[];
  reward: number;
  done: boolean;
  info: StepInfo;
}

export interface MakeOptions {
  /** Environment config file, forwarded to the server as `--config`. */
  configPath?: string;
  /** Seed used by reset() when none is given. Defaults to 0. */
  seed?: number;
  /** Interpreter used to launch the server. Defaults to "python3". */
  python?: string;
  /** Full server command line, overriding python/configPath (testing hook). */
  command?: string[];
}

export class EnvClientError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'EnvClientError';
  }
}

/** The server replied with an error, or with something unintelligible. */
export class ProtocolError extends EnvClientError {
  constructor(message: string) {
    super(message);
    this.name = 'ProtocolError';
  }
}

/** The server process is gone (exited, killed, or never started). */
export class ConnectionError extends EnvClientError {
  constructor(message: string) {
    super(message);
    this.name = 'ConnectionError';
  }
}

interface Pending {
  resolve: (reply: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

function expectNumberArray(value: unknown, length: number, what: string): number[] {
  if (!Array.isArray(value) || value.length !== length ||
      !value.every((v) => typeof v === 'number' && Number.isFinite(v))) {
    throw new ProtocolError(`${what} is not a ${length}-vector of finite numbers`);
  }
  return value as number[];
}

/**
 * One environment behind one server process.
 *
 * Construct with {@link DinerEnvClient.make}, which spawns the server and
 * validates the action/state sizes before handing the client back. Requests
 * are answered strictly in order, so replies are matched to callers with a
 * plain FIFO queue. The only state kept on this side of the pipe is the
 * done flag of the current episode; everything else is decoded verbatim.
 */
export class DinerEnvClient {
  actionSpace!: DiscreteSpace;
  observationSpace!: BoxSpace;

  private readonly child: ChildProcess;
  private readonly pending: Pending[] = [];
  private readonly defaultSeed: number;
  private episodeDone = false;
  private closed = false;
  private brokenBy: Error | null = null;

  private constructor(options: MakeOptions) {
    this.defaultSeed = options.seed ?? 0;
    const command = options.command ?? [
      options.python ?? 'python3',
      '-m', 'dinersim', 'serve',
      ...(options.configPath ? ['--config', options.configPath] : []),
    ];
    this.child = spawn(command[0], command.slice(1), {
      stdio: ['pipe', 'pipe', 'inherit'],
    });

    const lines = createInterface({ input: this.child.stdout! });
    lines.on('line', (line) => this.onLine(line));

    this.child.on('error', (err) => {
      this.fail(new ConnectionError(`could not start server: ${err.message}`));
    });
    this.child.on('exit', (code, signal) => {
      if (!this.closed) {
        this.fail(new ConnectionError(
          `server exited unexpectedly (code ${code}, signal ${signal})`));
      }
    });
    // stdin errors (EPIPE on a dead child) are reported via 'exit' instead
    this.child.stdin!.on('error', () => undefined);
  }

  /**
   * Spawn a server and return a connected client.
   *
   * Fetches the space sizes once and rejects anything that does not look
   * like the environment this client was written for.
   */
  static async make(options: MakeOptions = {}): Promise<DinerEnvClient> {
    const env = new DinerEnvClient(options);
    let spec: Record<string, unknown>;
    try {
      spec = await env.request({ cmd: 'spec' });
    } catch (err) {
      await env.close();
      throw err;
    }
    if (spec.n_actions !== N_ACTIONS || spec.state_dim !== STATE_DIM) {
      await env.close();
      throw new ProtocolError(
        `server reports ${spec.n_actions} actions / ${spec.state_dim} state ` +
        `dims, expected ${N_ACTIONS} / ${STATE_DIM}`);
    }
    env.actionSpace = { kind: 'discrete', n: N_ACTIONS };
    env.observationSpace = { kind: 'box', dim: STATE_DIM };
    return env;
  }

  /** Start a fresh episode; returns the initial state vector. */
  async reset(seed?: number): Promise<number[]> {
    const reply = await this.request({ cmd: 'reset', seed: seed ?? this.defaultSeed });
    const state = expectNumberArray(reply.state, STATE_DIM, 'reset state');
    this.episodeDone = false;
    return state;
  }

  /**
   * Apply one action.
   *
   * Rejected locally once the episode has finished; everything else round
   * trips through the server, and server-side error replies (bad action,
   * step before reset) surface as {@link ProtocolError} with the server's
   * message.
   */
  async step(action: number): Promise<StepResult> {
    if (this.episodeDone) {
      throw new EnvClientError('episode is done; call reset() before stepping again');
    }
    const reply = await this.request({ cmd: 'step', action });
    const state = expectNumberArray(reply.state, STATE_DIM, 'step state');
    if (typeof reply.reward !== 'number' || typeof reply.done !== 'boolean') {
      throw new ProtocolError('step reply is missing reward/done');
    }
    this.episodeDone = reply.done;
    return {
      state,
      reward: reply.reward,
      done: reply.done,
      info: reply.info as StepInfo,
    };
  }

  /** Ask the server to exit and reap the child. Safe to call twice. */
  async close(): Promise<void> {
    if (this.closed) {
      return;
    }
    this.closed = true;
    if (this.child.exitCode === null && this.child.signalCode === null) {
      try {
        this.child.stdin!.write('{"cmd":"close"}\n');
      } catch {
        // child already gone
      }
      const exited = await this.waitExit(5000);
      if (!exited) {
        this.child.kill('SIGKILL');
      }
    }
    this.fail(new ConnectionError('client is closed'));
  }

  private request(payload: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.brokenBy) {
      return Promise.reject(this.brokenBy);
    }
    if (this.closed) {
      return Promise.reject(new ConnectionError('client is closed'));
    }
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.child.stdin!.write(JSON.stringify(payload) + '\n');
    });
  }

  private onLine(line: string): void {
    const waiter = this.pending.shift();
    if (!waiter) {
      return; // unsolicited output; nothing is waiting on it
    }
    let reply: unknown;
    try {
      reply = JSON.parse(line);
    } catch {
      waiter.reject(new ProtocolError(`unparseable reply: ${line}`));
      return;
    }
    if (typeof reply === 'object' && reply !== null && 'error' in reply) {
      waiter.reject(new ProtocolError(String((reply as { error: unknown }).error)));
    } else {
      waiter.resolve(reply as Record<string, unknown>);
    }
  }

  /** Reject every in-flight request and refuse new ones. */
  private fail(err: Error): void {
    if (!this.brokenBy) {
      this.brokenBy = err;
    }
    while (this.pending.length > 0) {
      this.pending.shift()!.reject(err);
    }
  }

  private waitExit(timeoutMs: number): Promise<boolean> {
    if (this.child.exitCode !== null || this.child.signalCode !== null) {
      return Promise.resolve(true);
    }
    return new Promise((resolve) => {
      const timer = setTimeout(() => resolve(false), timeoutMs);
      this.child.once('exit', () => {
        clearTimeout(timer);
        resolve(true);
      });
    });
  }
}

export default DinerEnvClient;
