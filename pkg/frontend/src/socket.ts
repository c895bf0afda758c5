// Reconnecting WebSocket with exponential backoff.

export interface SocketCallbacks {
  onLine: (line: string) => void;
  onStatus: (status: "Connecting" | "Live" | "Lost") => void;
}

export class ReconnectingSocket {
  private ws: WebSocket | null = null;
  private backoffMs = 500;
  private closed = false;

  constructor(
    private readonly url: string,
    private readonly callbacks: SocketCallbacks,
  ) {}

  connect(): void {
    if (this.closed) return;
    this.callbacks.onStatus("Connecting");
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.backoffMs = 500;
      this.callbacks.onStatus("Live");
    };
    this.ws.onmessage = (ev) => {
      for (const line of String(ev.data).split("\n")) {
        if (line.trim()) this.callbacks.onLine(line);
      }
    };
    this.ws.onclose = () => this.scheduleReconnect();
    this.ws.onerror = () => this.ws?.close();
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    this.callbacks.onStatus("Lost");
    setTimeout(() => this.connect(), this.backoffMs);
    this.backoffMs = Math.min(this.backoffMs * 2, 8000);
  }

  /** Returns false (and marks the link Lost) when the send fails. */
  send(payload: string): boolean {
    if (!this.ws || this.ws.readyState !== WebSocket.OPEN) {
      this.callbacks.onStatus("Lost");
      return false;
    }
    try {
      this.ws.send(payload);
      return true;
    } catch {
      this.callbacks.onStatus("Lost");
      return false;
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
