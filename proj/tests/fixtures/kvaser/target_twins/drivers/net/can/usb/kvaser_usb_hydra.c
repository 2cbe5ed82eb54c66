/* Kvaser Hydra family: command helpers with explicit buffer scrubbing */

#include "kvaser_usb.h"

static int kvaser_usb_hydra_send_cmd(const struct kvaser_usb *dev, struct kvaser_cmd *cmd, int len)
{
	int actual_len;

	return usb_bulk_msg(dev->udev, dev->bulk_out, cmd, len, &actual_len, 1000);
}

static int kvaser_usb_hydra_send_config_cmd(const struct kvaser_usb *dev, u8 cmd_id, int channel)
{
	struct kvaser_cmd *cmd;
	int rc;

	cmd = kmalloc(sizeof(*cmd), GFP_KERNEL);
	if (!cmd)
		return -ENOMEM;

	memset(cmd, 0, sizeof(*cmd));
	cmd->id = cmd_id;
	cmd->len = CMD_SIZE_ANY;
	cmd->channel = channel;

	rc = kvaser_usb_hydra_send_cmd(dev, cmd, cmd->len);

	kfree(cmd);
	return rc;
}
