import { spawn } from "node:child_process";

export interface CliResult {
  code: number;
  stdout: string;
  stderr: string;
}

/** Compressor executable; override with the STARM_CLI environment variable. */
export function cliCommand(): string {
  return process.env.STARM_CLI ?? "starm";
}

export function runCli(args: string[]): Promise<CliResult> {
  return new Promise((resolve, reject) => {
    const child = spawn(cliCommand(), args, { stdio: ["ignore", "pipe", "pipe"] });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => (stdout += chunk));
    child.stderr.on("data", (chunk) => (stderr += chunk));
    child.on("error", reject);
    child.on("close", (code) => resolve({ code: code ?? 1, stdout, stderr }));
  });
}

/** Run the CLI and return stdout, throwing on a nonzero exit. */
export async function checkCli(args: string[]): Promise<string> {
  const result = await runCli(args);
  if (result.code !== 0) {
    const detail = result.stderr.trim() || `exit code ${result.code}`;
    throw new Error(`${cliCommand()} ${args[0]} failed: ${detail}`);
  }
  return result.stdout;
}

/** Parse key=value stdout lines (info, compress) into a map. */
export function parseKeyValues(stdout: string): Map<string, string> {
  const out = new Map<string, string>();
  for (const line of stdout.split("\n")) {
    const eq = line.indexOf("=");
    if (eq > 0) out.set(line.slice(0, eq), line.slice(eq + 1).trim());
  }
  return out;
}

/** Parse a numeric CLI field, accepting the inf sentinel. */
export function parseNumber(text: string | undefined, field: string): number {
  if (text === undefined) throw new Error(`missing ${field} in CLI output`);
  if (text === "inf") return Infinity;
  const value = Number(text);
  if (Number.isNaN(value)) throw new Error(`bad ${field} value ${JSON.stringify(text)}`);
  return value;
}
